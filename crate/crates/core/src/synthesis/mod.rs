//! Triple → multiple-choice QA synthesis.
//!
//! Each triple `(h, r, t)` becomes one pair: the question renders `(h, r)`
//! through the [`TemplateRegistry`], the tail is the answer at index 0, and
//! `m − 1` distractors are tails of other triples with the same relation
//! whose keywords do not overlap the answer triple's head or tail.

mod keywords;
mod templates;

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use keywords::{default_stoplist, extract_keywords, DEFAULT_STOPLIST};
pub use templates::{render_question, TemplateRegistry};

use crate::data::{DataError, Dataset, DatasetMeta, KnowledgeTriple, QaPair};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("no template registered for relation '{0}'")]
    MissingTemplate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("triple '{source_id}': found {found} of {needed} admissible distractors")]
    PoolExhausted {
        source_id: String,
        found: usize,
        needed: usize,
    },
    #[error(transparent)]
    InvalidTriple(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Options per pair, answer included.
    pub options: usize,
    pub seed: u64,
    pub stoplist: BTreeSet<String>,
    /// Candidate draws per pair before giving up.
    pub max_resample: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            options: 3,
            seed: 0,
            stoplist: default_stoplist(),
            max_resample: 200,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.options < 2 {
            return Err(SynthesisError::Config(format!("options must be >= 2, got {}", self.options)));
        }
        if self.max_resample < 1 {
            return Err(SynthesisError::Config("max_resample must be >= 1".into()));
        }
        Ok(())
    }
}

/// A distractor drawn from the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distractor {
    pub tail: String,
    pub source_id: String,
}

/// Candidate tails indexed by relation with precomputed keyword sets.
pub struct DistractorPool<'a> {
    triples: &'a [KnowledgeTriple],
    tail_keywords: Vec<BTreeSet<String>>,
    by_relation: HashMap<&'a str, Vec<usize>>,
}

fn same_text(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

impl<'a> DistractorPool<'a> {
    pub fn new(triples: &'a [KnowledgeTriple], cfg: &SynthesisConfig) -> Self {
        let tail_keywords = par::map(triples, |t| extract_keywords(&t.tail, &cfg.stoplist));
        let mut by_relation: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, t) in triples.iter().enumerate() {
            by_relation.entry(t.relation.as_str()).or_default().push(i);
        }
        DistractorPool {
            triples,
            tail_keywords,
            by_relation,
        }
    }

    /// Draws `cfg.options − 1` admissible distractors for `answer`.
    ///
    /// Candidates are same-relation triples visited in a seeded random order
    /// without replacement, at most `cfg.max_resample` of them. A candidate is
    /// admissible when its tail shares no keyword with the answer's head or
    /// tail and differs (case-insensitively) from the answer and from every
    /// distractor already taken.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        answer: &KnowledgeTriple,
        cfg: &SynthesisConfig,
        rng: &mut R,
    ) -> Result<Vec<Distractor>, SynthesisError> {
        let needed = cfg.options.saturating_sub(1);
        let mut banned = extract_keywords(&answer.head, &cfg.stoplist);
        banned.extend(extract_keywords(&answer.tail, &cfg.stoplist));

        let empty = Vec::new();
        let candidates = self.by_relation.get(answer.relation.as_str()).unwrap_or(&empty);
        let n = candidates.len();
        let mut picked: Vec<Distractor> = Vec::with_capacity(needed);
        // Sparse Fisher-Yates: positions swapped so far.
        let mut swapped: HashMap<usize, usize> = HashMap::new();
        for k in 0..n.min(cfg.max_resample) {
            if picked.len() == needed {
                break;
            }
            let j = rng.random_range(k..n);
            let at_j = *swapped.get(&j).unwrap_or(&j);
            let at_k = *swapped.get(&k).unwrap_or(&k);
            swapped.insert(j, at_k);
            let idx = candidates[at_j];
            let cand = &self.triples[idx];
            if !self.tail_keywords[idx].is_disjoint(&banned)
                || same_text(&cand.tail, &answer.tail)
                || picked.iter().any(|d| same_text(&d.tail, &cand.tail))
            {
                continue;
            }
            picked.push(Distractor {
                tail: cand.tail.clone(),
                source_id: cand.source_id.clone(),
            });
        }
        if picked.len() < needed {
            return Err(SynthesisError::PoolExhausted {
                source_id: answer.source_id.clone(),
                found: picked.len(),
                needed,
            });
        }
        Ok(picked)
    }
}

/// Draws distractors for `answer` from `pool`. Builds a throwaway
/// [`DistractorPool`]; use the pool directly when sampling repeatedly.
pub fn sample_distractors<R: Rng + ?Sized>(
    answer: &KnowledgeTriple,
    pool: &[KnowledgeTriple],
    cfg: &SynthesisConfig,
    rng: &mut R,
) -> Result<Vec<Distractor>, SynthesisError> {
    cfg.validate()?;
    DistractorPool::new(pool, cfg).sample(answer, cfg, rng)
}

/// A triple that did not yield a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedTriple {
    pub index: usize,
    pub source_id: String,
    pub error: SynthesisError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub dataset: Dataset,
    pub skipped: Vec<SkippedTriple>,
}

/// Per-triple RNG stream: the outcome for triple `i` does not depend on how
/// the other triples are scheduled.
fn triple_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn pair_id_for(index: usize) -> String {
    format!("p{index:07}")
}

/// Synthesizes one pair per triple. Triples that fail validation, lack a
/// template, or exhaust the pool are listed in `skipped`; configuration
/// errors abort the whole build.
pub fn build_dataset(
    triples: &[KnowledgeTriple],
    registry: &TemplateRegistry,
    cfg: &SynthesisConfig,
) -> Result<BuildOutcome, SynthesisError> {
    cfg.validate()?;
    registry.validate()?;
    let pool = DistractorPool::new(triples, cfg);

    let results = par::map_indexed(triples, |i, triple| -> Result<QaPair, SynthesisError> {
        triple.validate()?;
        let question = registry.render(triple)?;
        let mut rng = triple_rng(cfg.seed, i);
        let distractors = pool.sample(triple, cfg, &mut rng)?;
        let mut options = Vec::with_capacity(cfg.options);
        let mut provenance = Vec::with_capacity(cfg.options);
        options.push(triple.tail.clone());
        provenance.push(triple.source_id.clone());
        for d in distractors {
            options.push(d.tail);
            provenance.push(d.source_id);
        }
        Ok(QaPair {
            pair_id: pair_id_for(i),
            question,
            options,
            answer_index: 0,
            provenance: Some(provenance),
        })
    });

    let mut pairs = Vec::with_capacity(triples.len());
    let mut skipped = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => pairs.push(p),
            Err(error) => skipped.push(SkippedTriple {
                index,
                source_id: triples[index].source_id.clone(),
                error,
            }),
        }
    }
    let meta = DatasetMeta {
        registry_version: Some(registry.version.clone()),
        seed: Some(cfg.seed),
        skipped_triples: Some(skipped.len()),
        config: None,
    };
    // Tails are distinct case-insensitively, and ids are unique by index.
    let dataset = Dataset::new(pairs, meta)?;
    Ok(BuildOutcome { dataset, skipped })
}
