//! Brute-force reference implementations and random generators shared by the
//! integration tests. Deliberately naive: plain `exp`, full sorts, two-pass
//! moments.

#![allow(dead_code)]

use mcqa_cartography::{CheckpointScoreMatrix, Dataset, DynamicsRecord, QaPair};
use rand::Rng;

pub fn probs(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|s| (-s).exp()).collect()
}

pub fn oracle_softmax(scores: &[f64], focus: usize) -> f64 {
    let p = probs(scores);
    p[focus] / p.iter().sum::<f64>()
}

pub fn oracle_second_distractor(scores: &[f64], answer: usize) -> usize {
    let mut d: Vec<usize> = (0..scores.len()).filter(|&i| i != answer).collect();
    d.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap().then(i.cmp(&j)));
    d[1]
}

pub fn oracle_answer(scores: &[f64], answer: usize) -> f64 {
    let p = probs(scores);
    let j = oracle_second_distractor(scores, answer);
    p[answer] / (p[answer] + p[j])
}

pub fn oracle_distractor(scores: &[f64], i: usize) -> f64 {
    1.0 - oracle_softmax(scores, i)
}

pub fn oracle_pair(scores: &[f64], answer: usize) -> f64 {
    let a = oracle_answer(scores, answer);
    let m = scores.len();
    (0..m)
        .filter(|&i| i != answer)
        .map(|i| a + oracle_distractor(scores, i) - 1.0)
        .sum::<f64>()
        / m as f64
}

/// Mean and population standard deviation.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-checkpoint oracle values for one pair, then aggregated.
pub struct OracleRecord {
    pub answer: (f64, f64),
    pub distractors: Vec<(f64, f64)>,
    pub pair: (f64, f64),
    pub softmax: (f64, f64),
}

pub fn oracle_record(series: &[Vec<f64>], answer: usize) -> OracleRecord {
    let m = series[0].len();
    let col = |f: &dyn Fn(&[f64]) -> f64| -> (f64, f64) {
        two_pass(&series.iter().map(|s| f(s)).collect::<Vec<_>>())
    };
    OracleRecord {
        answer: col(&|s| oracle_answer(s, answer)),
        distractors: (0..m)
            .filter(|&i| i != answer)
            .map(|i| col(&|s| oracle_distractor(s, i)))
            .collect(),
        pair: col(&|s| oracle_pair(s, answer)),
        softmax: col(&|s| oracle_softmax(s, answer)),
    }
}

/// Largest absolute difference between a library record and the oracle.
pub fn record_error(r: &DynamicsRecord, o: &OracleRecord) -> f64 {
    let mut err: f64 = 0.0;
    let mut upd = |a: f64, b: f64| err = err.max((a - b).abs());
    upd(r.answer_confidence_mean, o.answer.0);
    upd(r.answer_confidence_var, o.answer.1);
    upd(r.pair_confidence_mean, o.pair.0);
    upd(r.pair_confidence_var, o.pair.1);
    upd(r.softmax_answer_confidence_mean, o.softmax.0);
    upd(r.softmax_answer_confidence_var, o.softmax.1);
    for (k, d) in o.distractors.iter().enumerate() {
        upd(r.per_distractor_confidence_mean[k], d.0);
        upd(r.per_distractor_confidence_var[k], d.1);
    }
    err
}

pub fn random_pair<R: Rng>(rng: &mut R, id: String, m: usize) -> QaPair {
    QaPair {
        pair_id: id.clone(),
        question: format!("question {id}"),
        options: (0..m).map(|i| format!("{id} option {i}")).collect(),
        answer_index: rng.random_range(0..m),
        provenance: None,
    }
}

/// Random dataset with arities drawn from `arity` and an `e`-checkpoint
/// score series with scores in `[0, 10)`.
pub fn random_series<R: Rng>(
    rng: &mut R,
    pairs: usize,
    arity: std::ops::RangeInclusive<usize>,
    e: u32,
) -> (Dataset, Vec<CheckpointScoreMatrix>) {
    let ps: Vec<QaPair> = (0..pairs)
        .map(|i| {
            let m = rng.random_range(arity.clone());
            random_pair(rng, format!("r{i:05}"), m)
        })
        .collect();
    let ds = Dataset::from_pairs(ps).unwrap();
    let series = (1..=e)
        .map(|c| {
            let scores = ds
                .iter()
                .map(|p| {
                    let s: Vec<f64> = (0..p.arity()).map(|_| rng.random_range(0.0..10.0)).collect();
                    (p.pair_id.clone(), s)
                })
                .collect();
            CheckpointScoreMatrix { checkpoint: c, scores }
        })
        .collect();
    (ds, series)
}
