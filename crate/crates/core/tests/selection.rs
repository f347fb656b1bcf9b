use std::collections::BTreeSet;

use mcqa_cartography::dynamics::{aggregate_dynamics, region_size};
use mcqa_cartography::scorer::{score_dataset, train_toy_model, ToyModel, TrainRun};
use mcqa_cartography::selection::*;
use mcqa_cartography::toy_corpus::{planted_corpus, CorpusSpec, PlantedCorpus};
use mcqa_cartography::{Dataset, DynamicsRecord};

fn trained(pairs: usize, seed: u64) -> (PlantedCorpus, Vec<DynamicsRecord>, ToyModel) {
    let corpus = planted_corpus(&CorpusSpec::planted(pairs, seed));
    let ds = &corpus.dataset;
    let run = TrainRun { epochs: 5, seed, ..TrainRun::default() };
    let out = train_toy_model(ds, &run, ToyModel::from_dataset(ds, 1.0, 1.0)).unwrap();
    let records = aggregate_dynamics(&out.checkpoints, ds).unwrap();
    (corpus, records, out.model)
}

fn recall_precision(flagged: &[String], truth: &BTreeSet<String>) -> (f64, f64) {
    let f: BTreeSet<&String> = flagged.iter().collect();
    let hit = truth.iter().filter(|t| f.contains(t)).count() as f64;
    (hit / truth.len() as f64, hit / f.len().max(1) as f64)
}

#[test]
fn planted_faults_are_recovered() {
    let (corpus, records, _) = trained(2000, 7);
    let (refined, rep) = apply_selection(&corpus.dataset, &records, &preset("mixed").unwrap()).unwrap();

    let (r, p) = recall_precision(&rep.mislabeled_ids, &corpus.swapped);
    assert!(r >= 0.7 && p >= 0.5, "mislabeled recall {r} precision {p}");
    let (r, p) = recall_precision(&rep.false_negative_ids, &corpus.correct_distractor());
    assert!(r >= 0.7 && p >= 0.5, "false-negative recall {r} precision {p}");
    let (r, _) = recall_precision(&rep.false_negative_ids, &corpus.paraphrase);
    assert!(r >= 0.7, "paraphrase recall {r}");

    let union: BTreeSet<&String> = rep.mislabeled_ids.iter().chain(&rep.false_negative_ids).collect();
    assert_eq!(rep.dropped_mixed, union.len());
    assert!(rep.dropped_mixed >= rep.dropped_mislabeled.max(rep.dropped_false_negative));
    assert!(rep.dropped_mixed <= rep.dropped_mislabeled + rep.dropped_false_negative);
    assert_eq!(refined.len() + rep.dropped_mixed, corpus.dataset.len());
    assert!(refined.iter().all(|p| !union.contains(&p.pair_id)));
    assert_eq!(rep.ratio_mixed, rep.dropped_mixed as f64 / rep.total as f64);
}

#[test]
fn difficult_choice_then_rescoring() {
    let (corpus, records, model) = trained(500, 3);
    let ds = &corpus.dataset;
    let (refined, rep) = apply_selection(ds, &records, &preset("difficult-choice").unwrap()).unwrap();
    assert_eq!(refined.len(), ds.len());
    assert_eq!(rep.options_removed, ds.len());
    for (before, after) in ds.iter().zip(refined.iter()) {
        assert_eq!(after.arity(), before.arity() - 1);
        assert_eq!(after.answer(), before.answer());
    }
    // Two-option pairs fall back to the softmax baseline when rescored.
    let rescored = aggregate_dynamics(&[score_dataset(&model, &refined, 1)], &refined).unwrap();
    assert!(rescored.iter().all(|r| r.softmax_fallback && r.matches(refined.get(&r.pair_id).unwrap())));
    // ...but cannot lose another option.
    assert!(matches!(
        apply_selection(&refined, &rescored, &preset("difficult-choice").unwrap()),
        Err(SelectionError::UnsupportedArity { .. })
    ));
}

#[test]
fn hard_mixed_accounting() {
    let (corpus, records, _) = trained(1000, 11);
    let ds = &corpus.dataset;
    let (refined, rep) = apply_selection(ds, &records, &preset("hard-mixed").unwrap()).unwrap();
    assert_eq!(rep.region_retained, region_size(0.5, ds.len()));
    assert_eq!(rep.region_retained, 500);
    assert_eq!(refined.len() + rep.dropped_mixed, rep.region_retained);
    assert!(refined.iter().all(|p| p.arity() == 2));
    let (plain, _) = apply_selection(ds, &records, &preset("hard").unwrap()).unwrap();
    let options: usize = plain.iter().map(|p| p.arity()).sum();
    let total: usize = ds.iter().map(|p| p.arity()).sum();
    assert_eq!(options * 3, total);
}

#[test]
fn identity_and_determinism() {
    let (corpus, records, _) = trained(300, 2);
    let ds: &Dataset = &corpus.dataset;
    let (same, rep) = apply_selection(ds, &records, &SelectionConfig::default()).unwrap();
    assert_eq!(&same, ds);
    assert_eq!(rep.dropped_mixed + rep.options_removed, 0);
    for name in preset_names() {
        let cfg = preset(name).unwrap();
        let a = apply_selection(ds, &records, &cfg).unwrap();
        let b = apply_selection(ds, &records, &cfg).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn flag_counts_monotone_in_thresholds() {
    let (_, records, _) = trained(500, 4);
    let mut last = (0, 0);
    for t in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
        let ml = records.iter().filter(|r| flag_mislabeled(r, t)).count();
        let fnf = records.iter().filter(|r| flag_false_negative(r, t)).count();
        assert!(ml >= last.0 && fnf >= last.1);
        last = (ml, fnf);
    }
}
