//! Option- and pair-level training dynamics.
//!
//! Scores are average masked negative log-likelihoods, so an option's
//! unnormalized probability is `exp(−S)`. At each checkpoint:
//!
//! * **answer confidence** compares the answer only with the distractor
//!   ranked second-lowest by score (the easier of the two most confusable
//!   distractors): `e^{−S_a} / (e^{−S_a} + e^{−S_j})`;
//! * **distractor confidence** is the probability that distractor `i` is
//!   wrong under a softmax over all options: `1 − e^{−S_i} / Σ_k e^{−S_k}`;
//! * **pair confidence** is `(1/m) Σ_k (answer + distractor_k − 1)` over the
//!   `m − 1` distractors, which lies in `[−(m−1)/m, (m−1)/m]`;
//! * the **softmax baseline** is the plain softmax probability of the answer.
//!
//! Across `E` checkpoints each quantity is summarized by its mean
//! (confidence) and population standard deviation (variability).
//!
//! All exponentials are taken relative to the lowest score in the vector, so
//! inputs shifted by a constant give bit-for-bit comparable results up to
//! rounding.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CheckpointScoreMatrix, Dataset, DynamicsRecord, QaPair};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("{needed}+ options required, got {got}; use the softmax baseline for two-option pairs")]
    UnsupportedArity { got: usize, needed: usize },
    #[error("index {index} out of range for {options} options")]
    IndexOutOfRange { index: usize, options: usize },
    #[error("option {0} is the answer, not a distractor")]
    NotADistractor(usize),
    #[error("score vector contains a non-finite value")]
    NonFinite,
    #[error("empty checkpoint series")]
    EmptySeries,
    #[error("{} (pair, checkpoint) entries missing from the series, first: {:?}", missing.len(), missing.first())]
    Incomplete { missing: Vec<(String, u32)> },
    #[error("pair '{pair_id}' has {expected} options but checkpoint {checkpoint} has {found} scores")]
    ArityMismatch {
        pair_id: String,
        checkpoint: u32,
        expected: usize,
        found: usize,
    },
    #[error("region fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("at least 2 histogram bins required, got {0}")]
    InvalidBins(usize),
}

fn check_scores(scores: &[f64]) -> Result<(), DynamicsError> {
    if scores.iter().all(|s| s.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite)
    }
}

fn check_index(index: usize, scores: &[f64]) -> Result<(), DynamicsError> {
    if index < scores.len() {
        Ok(())
    } else {
        Err(DynamicsError::IndexOutOfRange {
            index,
            options: scores.len(),
        })
    }
}

/// `exp(−(S_k − min S))` for every option, with their sum.
fn shifted_exps(scores: &[f64]) -> (Vec<f64>, f64) {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = scores.iter().map(|s| (-(s - lo)).exp()).collect();
    let total = exps.iter().sum();
    (exps, total)
}

/// `1 / (1 + e^{d})`, evaluated without overflow.
fn logistic_of_gap(d: f64) -> f64 {
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Option index of the distractor ranked second by ascending score, ties
/// broken by option index. Needs at least two distractors.
pub fn second_lowest_distractor(scores: &[f64], answer_index: usize) -> usize {
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&i| i != answer_index).collect();
    ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    ranked[1]
}

/// Pairwise answer confidence against the second-lowest distractor.
pub fn answer_confidence(scores: &[f64], answer_index: usize) -> Result<f64, DynamicsError> {
    if scores.len() < 3 {
        return Err(DynamicsError::UnsupportedArity {
            got: scores.len(),
            needed: 3,
        });
    }
    check_index(answer_index, scores)?;
    check_scores(scores)?;
    let j = second_lowest_distractor(scores, answer_index);
    Ok(logistic_of_gap(scores[answer_index] - scores[j]))
}

/// Softmax probability that option `index` is wrong.
pub fn distractor_confidence(scores: &[f64], answer_index: usize, index: usize) -> Result<f64, DynamicsError> {
    if scores.len() < 2 {
        return Err(DynamicsError::UnsupportedArity {
            got: scores.len(),
            needed: 2,
        });
    }
    check_index(answer_index, scores)?;
    check_index(index, scores)?;
    if index == answer_index {
        return Err(DynamicsError::NotADistractor(index));
    }
    check_scores(scores)?;
    let (exps, total) = shifted_exps(scores);
    // Sum the complement directly rather than computing 1 − p.
    Ok((total - exps[index]).max(0.0) / total)
}

fn distractor_confidences(scores: &[f64], answer_index: usize) -> Vec<f64> {
    let (exps, total) = shifted_exps(scores);
    (0..scores.len())
        .filter(|&i| i != answer_index)
        .map(|i| (total - exps[i]).max(0.0) / total)
        .collect()
}

fn compose_pair(answer: f64, distractors: &[f64]) -> f64 {
    let m = distractors.len() + 1;
    distractors.iter().map(|d| answer + d - 1.0).sum::<f64>() / m as f64
}

/// Pair confidence: mean over distractors of `answer + distractor − 1`,
/// divided by `m` rather than `m − 1`.
pub fn pair_confidence(scores: &[f64], answer_index: usize) -> Result<f64, DynamicsError> {
    let a = answer_confidence(scores, answer_index)?;
    Ok(compose_pair(a, &distractor_confidences(scores, answer_index)))
}

/// Softmax probability of option `focus`.
pub fn softmax_answer_confidence(scores: &[f64], focus: usize) -> Result<f64, DynamicsError> {
    if scores.len() < 2 {
        return Err(DynamicsError::UnsupportedArity {
            got: scores.len(),
            needed: 2,
        });
    }
    check_index(focus, scores)?;
    check_scores(scores)?;
    let (exps, total) = shifted_exps(scores);
    Ok(exps[focus] / total)
}

/// Every confidence of one pair at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCheckpointConfidence {
    pub pair_id: String,
    pub checkpoint: u32,
    pub answer_conf: f64,
    pub distractor_conf: Vec<f64>,
    pub pair_conf: f64,
    pub softmax_answer_conf: f64,
    /// Set for two-option pairs, where `answer_conf` is the softmax baseline.
    pub softmax_fallback: bool,
}

/// Confidences for one score vector. Two-option pairs fall back to the
/// softmax baseline for the answer (and hence pair) confidence.
pub fn checkpoint_confidence(
    pair_id: &str,
    checkpoint: u32,
    scores: &[f64],
    answer_index: usize,
) -> Result<PerCheckpointConfidence, DynamicsError> {
    let softmax = softmax_answer_confidence(scores, answer_index)?;
    let fallback = scores.len() == 2;
    let answer = if fallback {
        softmax
    } else {
        answer_confidence(scores, answer_index)?
    };
    let distractors = distractor_confidences(scores, answer_index);
    Ok(PerCheckpointConfidence {
        pair_id: pair_id.to_owned(),
        checkpoint,
        answer_conf: answer,
        pair_conf: compose_pair(answer, &distractors),
        distractor_conf: distractors,
        softmax_answer_conf: softmax,
        softmax_fallback: fallback,
    })
}

/// Running mean and population standard deviation (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2.max(0.0) / self.n as f64).sqrt()
        }
    }
}

fn aggregate_pair(pair: &QaPair, series: &[CheckpointScoreMatrix]) -> Result<DynamicsRecord, DynamicsError> {
    let m = pair.arity();
    let mut answer = Moments::default();
    let mut softmax = Moments::default();
    let mut pair_m = Moments::default();
    let mut distractors = vec![Moments::default(); m - 1];
    let mut fallback = false;
    for matrix in series {
        let scores = matrix.get(&pair.pair_id).ok_or_else(|| DynamicsError::Incomplete {
            missing: vec![(pair.pair_id.clone(), matrix.checkpoint)],
        })?;
        if scores.len() != m {
            return Err(DynamicsError::ArityMismatch {
                pair_id: pair.pair_id.clone(),
                checkpoint: matrix.checkpoint,
                expected: m,
                found: scores.len(),
            });
        }
        let c = checkpoint_confidence(&pair.pair_id, matrix.checkpoint, scores, pair.answer_index)?;
        answer.push(c.answer_conf);
        softmax.push(c.softmax_answer_conf);
        pair_m.push(c.pair_conf);
        for (acc, &d) in distractors.iter_mut().zip(&c.distractor_conf) {
            acc.push(d);
        }
        fallback = c.softmax_fallback;
    }
    Ok(DynamicsRecord {
        pair_id: pair.pair_id.clone(),
        answer_index: pair.answer_index,
        num_options: m,
        checkpoints: series.len(),
        answer_confidence_mean: answer.mean,
        answer_confidence_var: answer.std(),
        per_distractor_confidence_mean: distractors.iter().map(|d| d.mean).collect(),
        per_distractor_confidence_var: distractors.iter().map(Moments::std).collect(),
        pair_confidence_mean: pair_m.mean,
        pair_confidence_var: pair_m.std(),
        softmax_answer_confidence_mean: softmax.mean,
        softmax_answer_confidence_var: softmax.std(),
        softmax_fallback: fallback,
    })
}

/// Confidence and variability for every pair of `dataset`, in dataset order.
///
/// The series must hold a score vector for every pair at every checkpoint;
/// otherwise the error lists all missing `(pair_id, checkpoint)` entries.
pub fn aggregate_dynamics(series: &[CheckpointScoreMatrix], dataset: &Dataset) -> Result<Vec<DynamicsRecord>, DynamicsError> {
    if series.is_empty() {
        return Err(DynamicsError::EmptySeries);
    }
    let missing: Vec<(String, u32)> = series
        .iter()
        .flat_map(|m| {
            dataset
                .iter()
                .filter(|p| !m.scores.contains_key(&p.pair_id))
                .map(|p| (p.pair_id.clone(), m.checkpoint))
        })
        .collect();
    if !missing.is_empty() {
        return Err(DynamicsError::Incomplete { missing });
    }
    par::try_map(dataset.pairs(), |p| aggregate_pair(p, series))
}

/// Learnability regions of a data map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Highest pair confidence.
    Easy,
    /// Highest pair variability.
    Ambiguous,
    /// Lowest pair confidence.
    Hard,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Easy => "easy",
            Region::Ambiguous => "ambiguous",
            Region::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" | "easy-to-learn" => Ok(Region::Easy),
            "ambiguous" => Ok(Region::Ambiguous),
            "hard" | "hard-to-learn" => Ok(Region::Hard),
            other => Err(format!("unknown region '{other}'")),
        }
    }
}

/// `⌊f·N⌋`, with a small tolerance so that fractions such as 0.29 of 100
/// give 29 despite binary rounding.
pub fn region_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Pair ids of the `⌊f·N⌋` records that best match `region`, best first.
/// Ties break by ascending pair id.
pub fn partition_regions(records: &[DynamicsRecord], fraction: f64, region: Region) -> Result<Vec<String>, DynamicsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DynamicsError::InvalidFraction(fraction));
    }
    let k = region_size(fraction, records.len());
    let mut idx: Vec<usize> = (0..records.len()).collect();
    let key = |r: &DynamicsRecord| match region {
        Region::Easy | Region::Hard => r.pair_confidence_mean,
        Region::Ambiguous => r.pair_confidence_var,
    };
    let by_id = |a: &DynamicsRecord, b: &DynamicsRecord| a.pair_id.cmp(&b.pair_id);
    let cmp = |&a: &usize, &b: &usize| -> Ordering {
        let (ra, rb) = (&records[a], &records[b]);
        let primary = match region {
            Region::Hard => key(ra).total_cmp(&key(rb)),
            Region::Easy | Region::Ambiguous => key(rb).total_cmp(&key(ra)),
        };
        primary.then_with(|| by_id(ra, rb))
    };
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    } else {
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    Ok(idx.into_iter().map(|i| records[i].pair_id.clone()).collect())
}

/// Answer-minus-distractor confidence gaps, one per distractor, for the
/// pairwise answer confidence and for the softmax baseline. Both series use
/// the same distractor confidences.
pub fn confidence_gaps(records: &[DynamicsRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut pairwise = Vec::new();
    let mut softmax = Vec::new();
    for r in records {
        for &d in &r.per_distractor_confidence_mean {
            pairwise.push(r.answer_confidence_mean - d);
            softmax.push(r.softmax_answer_confidence_mean - d);
        }
    }
    (pairwise, softmax)
}

/// Same as [`confidence_gaps`] but from per-checkpoint values.
pub fn checkpoint_confidence_gaps(values: &[PerCheckpointConfidence]) -> (Vec<f64>, Vec<f64>) {
    let mut pairwise = Vec::new();
    let mut softmax = Vec::new();
    for c in values {
        for &d in &c.distractor_conf {
            pairwise.push(c.answer_conf - d);
            softmax.push(c.softmax_answer_conf - d);
        }
    }
    (pairwise, softmax)
}

/// Fraction of `values` with `|x| ≤ half_width`; 0 for an empty slice.
pub fn band_mass(values: &[f64], half_width: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|x| x.abs() <= half_width).count() as f64 / values.len() as f64
}

/// Two normalized histograms over `[−1, 1]` sharing bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDensity {
    /// `bins + 1` ascending edges from −1 to 1.
    pub edges: Vec<f64>,
    pub pairwise: Vec<f64>,
    pub softmax: Vec<f64>,
    pub samples: usize,
}

impl GapDensity {
    /// Index of the half-open bin `[edge_i, edge_{i+1})` holding `x`; 1.0
    /// lands in the last bin.
    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.edges.len() - 1)
    }
}

fn bin_index(x: f64, bins: usize) -> usize {
    let pos = ((x.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64).floor() as usize;
    pos.min(bins - 1)
}

fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    if values.is_empty() {
        return h;
    }
    for &x in values {
        h[bin_index(x, bins)] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

/// Histogram of confidence gaps for both series. Each series sums to 1
/// unless there are no distractors at all.
pub fn confidence_gap_density(records: &[DynamicsRecord], bins: usize) -> Result<GapDensity, DynamicsError> {
    let (pairwise, softmax) = confidence_gaps(records);
    gap_density_from(&pairwise, &softmax, bins)
}

pub fn gap_density_from(pairwise: &[f64], softmax: &[f64], bins: usize) -> Result<GapDensity, DynamicsError> {
    if bins < 2 {
        return Err(DynamicsError::InvalidBins(bins));
    }
    let edges = (0..=bins).map(|i| -1.0 + 2.0 * i as f64 / bins as f64).collect();
    Ok(GapDensity {
        edges,
        pairwise: histogram(pairwise, bins),
        softmax: histogram(softmax, bins),
        samples: pairwise.len(),
    })
}

/// Records keyed by pair id.
pub fn index_records(records: &[DynamicsRecord]) -> HashMap<&str, &DynamicsRecord> {
    records.iter().map(|r| (r.pair_id.as_str(), r)).collect()
}
