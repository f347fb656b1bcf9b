//! Synthetic corpora with known structure for exercising the toy trainer and
//! the selection flags.
//!
//! Every pair has a three-token question and two-token options drawn from
//! disjoint token classes:
//!
//! * answers use a small *plausible* vocabulary;
//! * one distractor per pair uses a *hard* vocabulary of the same size and
//!   frequency, so only training separates it from the answer;
//! * the remaining distractors use a large pool of *rare* tokens, so they are
//!   unlikely from the first checkpoint on.
//!
//! [`planted_corpus`] additionally plants two fault kinds in disjoint pair
//! subsets: answer-swapped pairs (the label points at the rare distractor
//! while the true answer stays among the options) and paraphrase pairs (the
//! hard distractor is replaced by another plausible phrase).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, DatasetMeta, QaPair};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub pairs: usize,
    /// Options per pair; at least 3.
    pub options: usize,
    pub seed: u64,
    pub plausible_tokens: usize,
    pub rare_tokens: usize,
    pub question_tokens: usize,
    pub swapped_rate: f64,
    pub paraphrase_rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            pairs: 2000,
            options: 3,
            seed: 0,
            plausible_tokens: 40,
            rare_tokens: 2000,
            question_tokens: 60,
            swapped_rate: 0.0,
            paraphrase_rate: 0.0,
        }
    }
}

impl CorpusSpec {
    pub fn planted(pairs: usize, seed: u64) -> Self {
        CorpusSpec {
            pairs,
            seed,
            swapped_rate: 0.05,
            paraphrase_rate: 0.05,
            ..CorpusSpec::default()
        }
    }
}

/// A generated dataset and the ids of pairs carrying each planted fault.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub dataset: Dataset,
    pub swapped: BTreeSet<String>,
    pub paraphrase: BTreeSet<String>,
}

impl PlantedCorpus {
    /// Pairs where some distractor is actually a correct answer: paraphrase
    /// pairs, and swapped pairs whose true answer now sits in a distractor
    /// slot.
    pub fn correct_distractor(&self) -> BTreeSet<String> {
        self.swapped.union(&self.paraphrase).cloned().collect()
    }
}

fn phrase(prefix: &str, pool: usize, rng: &mut ChaCha8Rng) -> String {
    let a = rng.random_range(0..pool);
    let mut b = rng.random_range(0..pool - 1);
    if b >= a {
        b += 1;
    }
    format!("{prefix}{a} {prefix}{b}")
}

/// Clean corpus: the answer is always the only plausible option.
pub fn separable_corpus(pairs: usize, seed: u64) -> Dataset {
    planted_corpus(&CorpusSpec { pairs, seed, ..CorpusSpec::default() }).dataset
}

pub fn planted_corpus(spec: &CorpusSpec) -> PlantedCorpus {
    assert!(spec.options >= 3, "toy corpus needs at least 3 options");
    assert!(spec.plausible_tokens >= 3 && spec.rare_tokens >= 2 && spec.question_tokens >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut ids: Vec<usize> = (0..spec.pairs).collect();
    ids.shuffle(&mut rng);
    let n_swapped = (spec.swapped_rate * spec.pairs as f64).round() as usize;
    let n_para = (spec.paraphrase_rate * spec.pairs as f64).round() as usize;
    assert!(n_swapped + n_para <= spec.pairs, "planted rates exceed corpus size");
    let swapped_idx: BTreeSet<usize> = ids[..n_swapped].iter().copied().collect();
    let para_idx: BTreeSet<usize> = ids[n_swapped..n_swapped + n_para].iter().copied().collect();

    let mut pairs = Vec::with_capacity(spec.pairs);
    let mut swapped = BTreeSet::new();
    let mut paraphrase = BTreeSet::new();
    for i in 0..spec.pairs {
        let pair_id = format!("t{i:06}");
        let question = (0..3)
            .map(|_| format!("q{}", rng.random_range(0..spec.question_tokens)))
            .collect::<Vec<_>>()
            .join(" ");
        let answer = phrase("plaus", spec.plausible_tokens, &mut rng);
        let hard = if para_idx.contains(&i) {
            paraphrase.insert(pair_id.clone());
            loop {
                let p = phrase("plaus", spec.plausible_tokens, &mut rng);
                if p != answer {
                    break p;
                }
            }
        } else {
            phrase("hard", spec.plausible_tokens, &mut rng)
        };
        let mut options = vec![answer.clone(), hard];
        while options.len() < spec.options {
            let p = phrase("rare", spec.rare_tokens, &mut rng);
            if !options.contains(&p) {
                options.push(p);
            }
        }
        options.shuffle(&mut rng);
        let mut answer_index = options.iter().position(|o| *o == answer).expect("answer placed");
        if swapped_idx.contains(&i) {
            swapped.insert(pair_id.clone());
            answer_index = options
                .iter()
                .position(|o| o.starts_with("rare"))
                .expect("rare distractor placed");
        }
        pairs.push(QaPair {
            pair_id,
            question,
            options,
            answer_index,
            provenance: None,
        });
    }
    let meta = DatasetMeta {
        seed: Some(spec.seed),
        ..DatasetMeta::default()
    };
    PlantedCorpus {
        dataset: Dataset::new(pairs, meta).expect("generated pairs are valid"),
        swapped,
        paraphrase,
    }
}
