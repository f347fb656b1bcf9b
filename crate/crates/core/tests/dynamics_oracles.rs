mod common;

use common::*;
use mcqa_cartography::dynamics::*;
use mcqa_cartography::format;
use mcqa_cartography::DynamicsRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

#[test]
fn per_checkpoint_formulas_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let m = rng.random_range(3..=5);
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
        let a = rng.random_range(0..m);
        assert!((answer_confidence(&s, a).unwrap() - oracle_answer(&s, a)).abs() < 1e-12);
        assert!((pair_confidence(&s, a).unwrap() - oracle_pair(&s, a)).abs() < 1e-12);
        assert!((softmax_answer_confidence(&s, a).unwrap() - oracle_softmax(&s, a)).abs() < 1e-12);
        for i in (0..m).filter(|&i| i != a) {
            assert!((distractor_confidence(&s, a, i).unwrap() - oracle_distractor(&s, i)).abs() < 1e-12);
        }
    }
}

#[test]
fn aggregation_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (ds, series) = random_series(&mut rng, 200, 3..=5, 7);
    let records = aggregate_dynamics(&series, &ds).unwrap();
    assert_eq!(records.len(), 200);
    for (r, p) in records.iter().zip(ds.iter()) {
        assert_eq!(r.pair_id, p.pair_id);
        let s: Vec<Vec<f64>> = series.iter().map(|m| m.scores[&p.pair_id].clone()).collect();
        let err = record_error(r, &oracle_record(&s, p.answer_index));
        assert!(err < 1e-12, "{}: {err}", p.pair_id);
    }
}

#[test]
fn constant_series_has_zero_variability() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (ds, one) = random_series(&mut rng, 20, 3..=3, 1);
    let series: Vec<_> = (1..=5)
        .map(|c| {
            let mut m = one[0].clone();
            m.checkpoint = c;
            m
        })
        .collect();
    let single = aggregate_dynamics(&one, &ds).unwrap();
    for (r, s) in aggregate_dynamics(&series, &ds).unwrap().iter().zip(&single) {
        assert!((r.pair_confidence_mean - s.pair_confidence_mean).abs() < 1e-12);
        assert!(r.pair_confidence_var.abs() < 1e-12 && s.pair_confidence_var == 0.0);
        assert!(r.per_distractor_confidence_var.iter().all(|v| v.abs() < 1e-12));
    }
}

fn oracle_region(records: &[DynamicsRecord], f: f64, region: Region) -> Vec<String> {
    let k = (f * records.len() as f64 + 1e-9).floor() as usize;
    let mut v: Vec<&DynamicsRecord> = records.iter().collect();
    v.sort_by(|a, b| {
        let key = match region {
            Region::Hard => a.pair_confidence_mean.partial_cmp(&b.pair_confidence_mean),
            Region::Easy => b.pair_confidence_mean.partial_cmp(&a.pair_confidence_mean),
            Region::Ambiguous => b.pair_confidence_var.partial_cmp(&a.pair_confidence_var),
        };
        key.unwrap().then_with(|| a.pair_id.cmp(&b.pair_id))
    });
    v[..k].iter().map(|r| r.pair_id.clone()).collect()
}

#[test]
fn regions_match_full_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (ds, series) = random_series(&mut rng, 1000, 3..=3, 3);
    let mut records = aggregate_dynamics(&series, &ds).unwrap();
    // Force some ties so the id tie-break is exercised.
    for r in records.iter_mut().step_by(7) {
        r.pair_confidence_mean = 0.1;
        r.pair_confidence_var = 0.05;
    }
    for region in [Region::Easy, Region::Ambiguous, Region::Hard] {
        for f in [0.33, 0.5, 1.0, 0.001] {
            let got = partition_regions(&records, f, region).unwrap();
            assert_eq!(got, oracle_region(&records, f, region), "{region:?} {f}");
        }
    }
    let easy = partition_regions(&records, 0.5, Region::Easy).unwrap();
    let hard = partition_regions(&records, 0.5, Region::Hard).unwrap();
    assert!(easy.iter().all(|id| !hard.contains(id)));
}

#[test]
fn worked_example_fixture() {
    let ds = format::read_dataset(format!("{FIXTURES}/worked_example_dataset.jsonl")).unwrap();
    let series = format::read_score_log(format!("{FIXTURES}/worked_example_scores.jsonl"), &ds).unwrap();
    let r = &aggregate_dynamics(&series, &ds).unwrap()[0];
    assert!((r.softmax_answer_confidence_mean - 0.65).abs() <= 0.005);
    assert!((r.answer_confidence_mean - 0.8808).abs() <= 1e-4);
    for d in &r.per_distractor_confidence_mean {
        assert!((d - 0.91).abs() <= 0.005);
        assert!((d - 0.9122).abs() <= 1e-4);
    }
    assert_eq!(r.answer_confidence_var, 0.0);
}

#[test]
fn gap_histograms_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (ds, series) = random_series(&mut rng, 300, 3..=5, 4);
    let records = aggregate_dynamics(&series, &ds).unwrap();
    for bins in [2, 7, 40] {
        let d = confidence_gap_density(&records, bins).unwrap();
        assert!((d.pairwise.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((d.softmax.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(d.edges.len(), bins + 1);
    }
}
