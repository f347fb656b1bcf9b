//! Dataset refinement driven by training dynamics.
//!
//! [`apply_selection`] runs up to three stages, in this order:
//!
//! 1. **region restriction**: keep the `⌊f·N⌋` pairs of one learnability
//!    region;
//! 2. **pair removal**: drop pairs flagged as mislabeled (low answer
//!    confidence) and/or as holding a false-negative distractor (some
//!    distractor not confidently wrong). With both enabled the union is
//!    removed (Mixed Strategy);
//! 3. **Difficult Choice**: from each surviving pair drop the distractor the
//!    model most confidently rejects.
//!
//! With three-option pairs, restricting to half the data and then dropping
//! one option per pair leaves one third of the original option count.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, DynamicsRecord, QaPair};
use crate::dynamics::{partition_regions, DynamicsError, Region};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("Difficult Choice needs at least 3 options; pair '{pair_id}' has {options}")]
    UnsupportedArity { pair_id: String, options: usize },
    #[error("dynamics record does not match pair '{0}' (id, arity or answer index differ)")]
    RecordMismatch(String),
    #[error("{} pairs have no dynamics record, first: '{}'", missing.len(), missing.first().map(String::as_str).unwrap_or(""))]
    Coverage { missing: Vec<String> },
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// How the false-negative flag reads distractor confidences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum FalseNegativeRule {
    /// Flag when the least confidently rejected distractor has mean
    /// confidence below the threshold.
    #[default]
    LowestDistractor,
    /// Flag when `|answer − max distractor|` mean confidence is below
    /// `max_gap`: the literal "insignificant difference to the highest
    /// confidence distractor" reading.
    HighestDistractorGap { max_gap: f64 },
}

/// Which region, if any, to restrict to before pair removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegionChoice {
    #[default]
    None,
    Easy,
    Ambiguous,
    Hard,
}

impl RegionChoice {
    pub fn region(self) -> Option<Region> {
        match self {
            RegionChoice::None => None,
            RegionChoice::Easy => Some(Region::Easy),
            RegionChoice::Ambiguous => Some(Region::Ambiguous),
            RegionChoice::Hard => Some(Region::Hard),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub mislabeled_threshold: f64,
    pub false_negative_threshold: f64,
    pub false_negative_rule: FalseNegativeRule,
    pub region: RegionChoice,
    pub region_fraction: f64,
    pub difficult_choice: bool,
    pub mislabeled: bool,
    pub false_negative: bool,
    pub rng_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            mislabeled_threshold: 0.4,
            false_negative_threshold: 0.6,
            false_negative_rule: FalseNegativeRule::LowestDistractor,
            region: RegionChoice::None,
            region_fraction: 1.0,
            difficult_choice: false,
            mislabeled: false,
            false_negative: false,
            rng_seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(SelectionError::Config(format!("{name} must be in (0, 1), got {x}")))
            }
        };
        open_unit("mislabeled_threshold", self.mislabeled_threshold)?;
        open_unit("false_negative_threshold", self.false_negative_threshold)?;
        if !(self.region_fraction > 0.0 && self.region_fraction <= 1.0) {
            return Err(SelectionError::Config(format!(
                "region_fraction must be in (0, 1], got {}",
                self.region_fraction
            )));
        }
        if let FalseNegativeRule::HighestDistractorGap { max_gap } = self.false_negative_rule {
            open_unit("max_gap", max_gap)?;
        }
        Ok(())
    }

    /// Mixed Strategy: both pair-removal flags.
    pub fn mixed(&self) -> bool {
        self.mislabeled && self.false_negative
    }
}

/// Mean answer confidence below `threshold`.
pub fn flag_mislabeled(record: &DynamicsRecord, threshold: f64) -> bool {
    record.answer_confidence_mean < threshold
}

/// Some distractor's mean confidence of being wrong is below `threshold`.
pub fn flag_false_negative(record: &DynamicsRecord, threshold: f64) -> bool {
    record
        .per_distractor_confidence_mean
        .iter()
        .any(|&d| d < threshold)
}

pub fn flag_false_negative_with(record: &DynamicsRecord, cfg: &SelectionConfig) -> bool {
    match cfg.false_negative_rule {
        FalseNegativeRule::LowestDistractor => flag_false_negative(record, cfg.false_negative_threshold),
        FalseNegativeRule::HighestDistractorGap { max_gap } => {
            let top = record
                .per_distractor_confidence_mean
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            (record.answer_confidence_mean - top).abs() < max_gap
        }
    }
}

/// Removes the distractor with the highest mean confidence (lowest option
/// index on ties), keeping the answer and remapping `answer_index`.
/// Provenance aligned with the options loses the same entry.
pub fn drop_easy_distractor(pair: &QaPair, record: &DynamicsRecord) -> Result<QaPair, SelectionError> {
    if pair.arity() < 3 {
        return Err(SelectionError::UnsupportedArity {
            pair_id: pair.pair_id.clone(),
            options: pair.arity(),
        });
    }
    if !record.matches(pair) {
        return Err(SelectionError::RecordMismatch(pair.pair_id.clone()));
    }
    let mut best = 0;
    for (k, &c) in record.per_distractor_confidence_mean.iter().enumerate() {
        if c > record.per_distractor_confidence_mean[best] {
            best = k;
        }
    }
    let drop = record.distractor_option_index(best);
    let mut out = pair.clone();
    out.options.remove(drop);
    if drop < out.answer_index {
        out.answer_index -= 1;
    }
    if let Some(prov) = out.provenance.as_mut() {
        if prov.len() == pair.arity() {
            prov.remove(drop);
        }
    }
    Ok(out)
}

/// Counts and ids of one [`apply_selection`] run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub total: usize,
    /// Pairs left after region restriction (equals `total` without one).
    pub region_retained: usize,
    pub dropped_mislabeled: usize,
    pub dropped_false_negative: usize,
    /// Pairs actually removed: the union of the active flags.
    pub dropped_mixed: usize,
    pub options_removed: usize,
    pub retained: usize,
    pub ratio_mislabeled: f64,
    pub ratio_false_negative: f64,
    pub ratio_mixed: f64,
    pub mislabeled_ids: Vec<String>,
    pub false_negative_ids: Vec<String>,
    pub dropped_ids: Vec<String>,
    pub config: SelectionConfig,
}

fn ratio(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn pct(count: usize, total: usize) -> String {
    format!("{:.2}%", 100.0 * ratio(count, total))
}

impl SelectionReport {
    /// Drop statistics laid out as a small text table: one column per
    /// strategy plus the total, with a count row and a percentage row.
    pub fn table(&self) -> String {
        let header = ["", "Mislabeled", "False-Neg.", "Mixed Strategy", "Total"];
        let counts = [
            "Data size".to_owned(),
            self.dropped_mislabeled.to_string(),
            self.dropped_false_negative.to_string(),
            self.dropped_mixed.to_string(),
            self.total.to_string(),
        ];
        let ratios = [
            "Ratio".to_owned(),
            pct(self.dropped_mislabeled, self.total),
            pct(self.dropped_false_negative, self.total),
            pct(self.dropped_mixed, self.total),
            "100%".to_owned(),
        ];
        let widths: Vec<usize> = (0..5)
            .map(|c| header[c].len().max(counts[c].len()).max(ratios[c].len()))
            .collect();
        let row = |cells: [&str; 5]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join(" | ")
        };
        let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
        let mut out = String::new();
        out.push_str(&row(header));
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        out.push_str(&row(counts.each_ref().map(String::as_str)));
        out.push('\n');
        out.push_str(&row(ratios.each_ref().map(String::as_str)));
        out.push('\n');
        out.push_str(&format!(
            "\nregion retained: {} / {}; pairs out: {}; options removed: {}\n",
            self.region_retained, self.total, self.retained, self.options_removed
        ));
        out
    }
}

impl fmt::Display for SelectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

/// Refines `dataset` using `records`; see the module docs for stage order.
pub fn apply_selection(
    dataset: &Dataset,
    records: &[DynamicsRecord],
    cfg: &SelectionConfig,
) -> Result<(Dataset, SelectionReport), SelectionError> {
    cfg.validate()?;
    let by_id: HashMap<&str, &DynamicsRecord> = records.iter().map(|r| (r.pair_id.as_str(), r)).collect();
    let missing: Vec<String> = dataset
        .iter()
        .filter(|p| !by_id.contains_key(p.pair_id.as_str()))
        .map(|p| p.pair_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(SelectionError::Coverage { missing });
    }
    let aligned: Vec<&DynamicsRecord> = dataset.iter().map(|p| by_id[p.pair_id.as_str()]).collect();
    for (p, r) in dataset.iter().zip(&aligned) {
        if !r.matches(p) {
            return Err(SelectionError::RecordMismatch(p.pair_id.clone()));
        }
    }

    // 1. region
    let in_region: Vec<bool> = match cfg.region.region() {
        None => vec![true; dataset.len()],
        Some(region) => {
            let owned: Vec<DynamicsRecord> = aligned.iter().map(|r| (*r).clone()).collect();
            let keep: BTreeSet<String> =
                partition_regions(&owned, cfg.region_fraction, region)?.into_iter().collect();
            dataset.iter().map(|p| keep.contains(&p.pair_id)).collect()
        }
    };

    // 2. flags, evaluated on the region subset only
    let flags: Vec<(bool, bool)> = par::map_indexed(&aligned, |i, r| {
        if !in_region[i] {
            return (false, false);
        }
        (
            cfg.mislabeled && flag_mislabeled(r, cfg.mislabeled_threshold),
            cfg.false_negative && flag_false_negative_with(r, cfg),
        )
    });

    // 3. rewrite
    let mut pairs = Vec::new();
    let mut mislabeled_ids = Vec::new();
    let mut false_negative_ids = Vec::new();
    let mut dropped_ids = Vec::new();
    let mut options_removed = 0;
    for (i, pair) in dataset.iter().enumerate() {
        if !in_region[i] {
            continue;
        }
        let (ml, fnf) = flags[i];
        if ml {
            mislabeled_ids.push(pair.pair_id.clone());
        }
        if fnf {
            false_negative_ids.push(pair.pair_id.clone());
        }
        if ml || fnf {
            dropped_ids.push(pair.pair_id.clone());
            continue;
        }
        if cfg.difficult_choice {
            pairs.push(drop_easy_distractor(pair, aligned[i])?);
            options_removed += 1;
        } else {
            pairs.push(pair.clone());
        }
    }

    let total = dataset.len();
    let report = SelectionReport {
        total,
        region_retained: in_region.iter().filter(|&&b| b).count(),
        dropped_mislabeled: mislabeled_ids.len(),
        dropped_false_negative: false_negative_ids.len(),
        dropped_mixed: dropped_ids.len(),
        options_removed,
        retained: pairs.len(),
        ratio_mislabeled: ratio(mislabeled_ids.len(), total),
        ratio_false_negative: ratio(false_negative_ids.len(), total),
        ratio_mixed: ratio(dropped_ids.len(), total),
        mislabeled_ids,
        false_negative_ids,
        dropped_ids,
        config: cfg.clone(),
    };
    let refined = Dataset::new(pairs, dataset.meta.clone())?;
    Ok((refined, report))
}

const PRESETS: &[&str] = &[
    "none",
    "mislabeled",
    "false-negative",
    "mixed",
    "difficult-choice",
    "difficult-choice-mislabeled",
    "difficult-choice-false-negative",
    "difficult-choice-mixed",
    "hard",
    "hard-mislabeled",
    "hard-false-negative",
    "hard-mixed",
    "easy-to-learn-33",
    "easy-to-learn-66",
    "ambiguous-33",
    "ambiguous-66",
    "hard-to-learn-33",
    "hard-to-learn-66",
    "hard-to-learn-33-mislabeled",
    "hard-to-learn-66-mislabeled",
    "hard-to-learn-33-false-negative",
    "hard-to-learn-66-false-negative",
    "hard-to-learn-33-mixed",
    "hard-to-learn-66-mixed",
];

pub fn preset_names() -> &'static [&'static str] {
    PRESETS
}

/// Named pipelines.
///
/// * `difficult-choice[-mislabeled|-false-negative|-mixed]`: all data,
///   Difficult Choice, optional pair removal.
/// * `hard[-…]`: the same on the 50% lowest-confidence pairs.
/// * `{easy-to-learn,ambiguous,hard-to-learn}-{33,66}[-…]`: cartography
///   baselines, a region at 33% or 66% with optional pair removal and no
///   option dropping.
/// * `none`, `mislabeled`, `false-negative`, `mixed`: pair removal only.
pub fn preset(name: &str) -> Result<SelectionConfig, SelectionError> {
    if !PRESETS.contains(&name) {
        return Err(SelectionError::UnknownPreset(name.to_owned()));
    }
    let mut cfg = SelectionConfig::default();
    let mut rest = name;
    for (prefix, region, fraction, dc) in [
        ("difficult-choice", RegionChoice::None, 1.0, true),
        ("hard-to-learn-33", RegionChoice::Hard, 0.33, false),
        ("hard-to-learn-66", RegionChoice::Hard, 0.66, false),
        ("easy-to-learn-33", RegionChoice::Easy, 0.33, false),
        ("easy-to-learn-66", RegionChoice::Easy, 0.66, false),
        ("ambiguous-33", RegionChoice::Ambiguous, 0.33, false),
        ("ambiguous-66", RegionChoice::Ambiguous, 0.66, false),
        ("hard", RegionChoice::Hard, 0.5, true),
    ] {
        if let Some(tail) = rest.strip_prefix(prefix) {
            cfg.region = region;
            cfg.region_fraction = fraction;
            cfg.difficult_choice = dc;
            rest = tail.strip_prefix('-').unwrap_or(tail);
            break;
        }
    }
    match rest {
        "" | "none" => {}
        "mislabeled" => cfg.mislabeled = true,
        "false-negative" => cfg.false_negative = true,
        "mixed" => {
            cfg.mislabeled = true;
            cfg.false_negative = true;
        }
        _ => unreachable!("preset table and parser disagree on '{name}'"),
    }
    Ok(cfg)
}
