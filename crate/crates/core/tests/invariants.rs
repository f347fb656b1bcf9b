use mcqa_cartography::dynamics::*;
use mcqa_cartography::selection::{drop_easy_distractor, flag_false_negative, flag_mislabeled};
use mcqa_cartography::{DynamicsRecord, QaPair};
use proptest::prelude::*;

fn scores_and_answer() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (3usize..=6).prop_flat_map(|m| (prop::collection::vec(0.0f64..20.0, m), 0..m))
}

fn record_strategy() -> impl Strategy<Value = DynamicsRecord> {
    (3usize..=5).prop_flat_map(|m| {
        (
            0..m,
            0.0f64..=1.0,
            prop::collection::vec(0.0f64..=1.0, m - 1),
        )
            .prop_map(move |(a, ac, d)| DynamicsRecord {
                pair_id: "x".into(),
                answer_index: a,
                num_options: m,
                checkpoints: 1,
                answer_confidence_mean: ac,
                answer_confidence_var: 0.0,
                per_distractor_confidence_var: vec![0.0; m - 1],
                pair_confidence_mean: d.iter().map(|dk| ac + dk - 1.0).sum::<f64>() / m as f64,
                per_distractor_confidence_mean: d,
                pair_confidence_var: 0.0,
                softmax_answer_confidence_mean: ac / 2.0,
                softmax_answer_confidence_var: 0.0,
                softmax_fallback: false,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shift_invariance((s, a) in scores_and_answer(), c in -10.0f64..10.0) {
        let t: Vec<f64> = s.iter().map(|x| x + c).collect();
        prop_assert!((answer_confidence(&s, a).unwrap() - answer_confidence(&t, a).unwrap()).abs() < 1e-9);
        prop_assert!((pair_confidence(&s, a).unwrap() - pair_confidence(&t, a).unwrap()).abs() < 1e-9);
        prop_assert!((softmax_answer_confidence(&s, a).unwrap() - softmax_answer_confidence(&t, a).unwrap()).abs() < 1e-9);
        for i in (0..s.len()).filter(|&i| i != a) {
            prop_assert!((distractor_confidence(&s, a, i).unwrap() - distractor_confidence(&t, a, i).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn pairwise_dominates_softmax((s, a) in scores_and_answer()) {
        prop_assert!(answer_confidence(&s, a).unwrap() >= softmax_answer_confidence(&s, a).unwrap());
    }

    #[test]
    fn ranges((s, a) in scores_and_answer()) {
        let m = s.len() as f64;
        let bound = (m - 1.0) / m;
        let p = pair_confidence(&s, a).unwrap();
        prop_assert!(p >= -bound && p <= bound);
        let ac = answer_confidence(&s, a).unwrap();
        prop_assert!(ac > 0.0 && ac < 1.0);
        for i in (0..s.len()).filter(|&i| i != a) {
            let d = distractor_confidence(&s, a, i).unwrap();
            prop_assert!(d > 0.0 && d < 1.0);
        }
    }

    #[test]
    fn monotone_in_answer_score((s, a) in scores_and_answer(), delta in 0.0f64..5.0) {
        let mut lower = s.clone();
        lower[a] -= delta;
        prop_assert!(answer_confidence(&lower, a).unwrap() >= answer_confidence(&s, a).unwrap());
        prop_assert!(pair_confidence(&lower, a).unwrap() >= pair_confidence(&s, a).unwrap() - 1e-15);
        prop_assert!(softmax_answer_confidence(&lower, a).unwrap() >= softmax_answer_confidence(&s, a).unwrap());
    }

    #[test]
    fn flags_monotone_in_thresholds(r in record_strategy(), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(!flag_mislabeled(&r, lo) || flag_mislabeled(&r, hi));
        prop_assert!(!flag_false_negative(&r, lo) || flag_false_negative(&r, hi));
    }

    #[test]
    fn difficult_choice_preserves_answer(r in record_strategy()) {
        let m = r.num_options;
        let pair = QaPair {
            pair_id: "x".into(),
            question: "q".into(),
            options: (0..m).map(|i| format!("o{i}")).collect(),
            answer_index: r.answer_index,
            provenance: Some((0..m).map(|i| format!("s{i}")).collect()),
        };
        let out = drop_easy_distractor(&pair, &r).unwrap();
        prop_assert_eq!(out.arity(), m - 1);
        prop_assert_eq!(out.answer(), pair.answer());
        prop_assert!(out.validate().is_ok());
        // Survivors keep their relative order, provenance stays aligned.
        let kept: Vec<&String> = pair.options.iter().filter(|o| out.options.contains(o)).collect();
        prop_assert_eq!(kept, out.options.iter().collect::<Vec<_>>());
        let prov = out.provenance.as_ref().unwrap();
        for (o, s) in out.options.iter().zip(prov) {
            prop_assert_eq!(&o[1..], &s[1..]);
        }
    }
}
