use std::collections::{BTreeSet, HashMap};

use mcqa_cartography::format::write_dataset_to;
use mcqa_cartography::synthesis::*;
use mcqa_cartography::KnowledgeTriple;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "apple", "river", "stone", "cloud", "music", "paper", "garden", "window", "bread", "candle",
    "forest", "market", "pencil", "ladder", "mirror", "bottle", "engine", "jacket", "pillow", "rocket",
    "silver", "tunnel", "violin", "wallet", "yellow", "basket", "castle", "dinner", "family", "guitar",
];
const RELATIONS: &[&str] = &["xReact", "xWant", "AtLocation", "UsedFor"];

fn toy_triples(n: usize, seed: u64) -> Vec<KnowledgeTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word = || WORDS[rng.random_range(0..WORDS.len())];
    (0..n)
        .map(|i| {
            let head = format!("PersonX finds the {} near the {}", word(), word());
            let tail = format!("{} {}", word(), word());
            let relation = RELATIONS[i % RELATIONS.len()];
            KnowledgeTriple::new(head, relation, tail, format!("src{i:05}"))
        })
        .collect()
}

#[test]
fn every_pair_satisfies_distractor_rules() {
    let triples = toy_triples(2000, 1);
    let registry = TemplateRegistry::default();
    let cfg = SynthesisConfig { options: 3, seed: 4, ..SynthesisConfig::default() };
    let out = build_dataset(&triples, &registry, &cfg).unwrap();
    assert_eq!(out.dataset.len() + out.skipped.len(), triples.len());
    assert!(out.dataset.len() > 1500, "only {} pairs built", out.dataset.len());
    for s in &out.skipped {
        assert!(matches!(s.error, SynthesisError::PoolExhausted { .. }), "{:?}", s.error);
    }

    let by_source: HashMap<&str, &KnowledgeTriple> = triples.iter().map(|t| (t.source_id.as_str(), t)).collect();
    let stop = &cfg.stoplist;
    for pair in out.dataset.iter() {
        let prov = pair.provenance.as_ref().unwrap();
        let answer = by_source[prov[0].as_str()];
        assert_eq!(pair.answer_index, 0);
        assert_eq!(pair.options.len(), 3);
        assert_eq!(pair.options[0], answer.tail);
        assert_eq!(pair.question, render_question(answer, &registry).unwrap());
        let mut answer_kw = extract_keywords(&answer.head, stop);
        answer_kw.extend(extract_keywords(&answer.tail, stop));
        let mut seen: BTreeSet<String> = BTreeSet::new();
        seen.insert(answer.tail.to_lowercase());
        for (opt, src) in pair.options.iter().zip(prov).skip(1) {
            let d = by_source[src.as_str()];
            assert_eq!(&d.tail, opt);
            assert_eq!(d.relation, answer.relation, "{}", pair.pair_id);
            assert!(extract_keywords(opt, stop).is_disjoint(&answer_kw), "{}: '{opt}'", pair.pair_id);
            assert!(seen.insert(opt.to_lowercase()), "{}: repeated '{opt}'", pair.pair_id);
        }
    }
}

fn bytes(triples: &[KnowledgeTriple], seed: u64) -> Vec<u8> {
    let cfg = SynthesisConfig { seed, ..SynthesisConfig::default() };
    let out = build_dataset(triples, &TemplateRegistry::default(), &cfg).unwrap();
    let mut buf = Vec::new();
    write_dataset_to(&mut buf, &out.dataset).unwrap();
    buf
}

#[test]
fn deterministic_across_runs_and_thread_counts() {
    let triples = toy_triples(1000, 2);
    let a = bytes(&triples, 3);
    assert_eq!(a, bytes(&triples, 3));
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    assert_eq!(a, single.install(|| bytes(&triples, 3)));
    assert_ne!(a, bytes(&triples, 4));
}

#[test]
fn empty_and_single_inputs() {
    let registry = TemplateRegistry::default();
    let cfg = SynthesisConfig::default();
    assert!(build_dataset(&[], &registry, &cfg).unwrap().dataset.is_empty());

    let pool = vec![
        KnowledgeTriple::new("PersonX bakes bread", "xReact", "proud", "a"),
        KnowledgeTriple::new("PersonX sings", "xReact", "relaxed", "b"),
        KnowledgeTriple::new("PersonX runs", "xReact", "tired", "c"),
    ];
    let out = build_dataset(&pool[..1], &registry, &cfg).unwrap();
    assert!(out.dataset.is_empty());
    assert_eq!(out.skipped.len(), 1);
    let out = build_dataset(&pool, &registry, &cfg).unwrap();
    assert_eq!(out.dataset.len(), 3);
    assert!(out.dataset.iter().all(|p| p.arity() == 3));
}
