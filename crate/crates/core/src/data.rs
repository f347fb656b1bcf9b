//! Shared domain types.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("pair '{pair_id}': {reason}")]
    InvalidPair { pair_id: String, reason: PairDefect },
    #[error("duplicate pair_id '{0}'")]
    DuplicatePairId(String),
    #[error("triple '{source_id}': {field} is empty")]
    EmptyTripleField { source_id: String, field: &'static str },
}

/// What is wrong with a [`QaPair`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairDefect {
    #[error("needs at least 2 options, found {0}")]
    TooFewOptions(usize),
    #[error("answer_index {index} out of range for {options} options")]
    AnswerOutOfRange { index: usize, options: usize },
    #[error("options {first} and {second} have identical text")]
    DuplicateOption { first: usize, second: usize },
}

impl PairDefect {
    /// The record field the defect belongs to.
    pub fn field(&self) -> &'static str {
        match self {
            PairDefect::TooFewOptions(_) | PairDefect::DuplicateOption { .. } => "options",
            PairDefect::AnswerOutOfRange { .. } => "answer_index",
        }
    }
}

/// A `(head, relation, tail)` record from a source knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub source_id: String,
}

impl KnowledgeTriple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Self {
        KnowledgeTriple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            source_id: source_id.into(),
        }
    }

    /// Checks the structural invariants. Relation registration is checked by
    /// the template registry, not here.
    pub fn validate(&self) -> Result<(), DataError> {
        for (field, value) in [("head", &self.head), ("tail", &self.tail)] {
            if value.trim().is_empty() {
                return Err(DataError::EmptyTripleField {
                    source_id: self.source_id.clone(),
                    field,
                });
            }
        }
        Ok(())
    }
}

/// A question with an ordered option set and the index of the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub pair_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    /// Source ids aligned with `options` when its length equals the arity
    /// (answer triple plus distractor triples).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Vec<String>>,
}

impl QaPair {
    pub fn arity(&self) -> usize {
        self.options.len()
    }

    pub fn answer(&self) -> &str {
        &self.options[self.answer_index]
    }

    /// Option indices of the distractors, ascending. The k-th entry lines up
    /// with the k-th per-distractor statistic in a [`DynamicsRecord`].
    pub fn distractor_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.options.len()).filter(move |&i| i != self.answer_index)
    }

    pub fn defect(&self) -> Option<PairDefect> {
        let m = self.options.len();
        if m < 2 {
            return Some(PairDefect::TooFewOptions(m));
        }
        if self.answer_index >= m {
            return Some(PairDefect::AnswerOutOfRange {
                index: self.answer_index,
                options: m,
            });
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(m);
        for (i, opt) in self.options.iter().enumerate() {
            if let Some(&first) = seen.get(opt.as_str()) {
                return Some(PairDefect::DuplicateOption { first, second: i });
            }
            seen.insert(opt, i);
        }
        None
    }

    pub fn validate(&self) -> Result<(), DataError> {
        match self.defect() {
            None => Ok(()),
            Some(reason) => Err(DataError::InvalidPair {
                pair_id: self.pair_id.clone(),
                reason,
            }),
        }
    }
}

/// Dataset-level provenance carried in the optional header line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_triples: Option<usize>,
    /// Effective configuration of the command that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl DatasetMeta {
    pub fn is_empty(&self) -> bool {
        *self == DatasetMeta::default()
    }
}

/// An ordered collection of pairs with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pairs: Vec<QaPair>,
    pub meta: DatasetMeta,
    index: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.pairs == other.pairs && self.meta == other.meta
    }
}

impl Dataset {
    /// Validates every pair and id uniqueness.
    pub fn new(pairs: Vec<QaPair>, meta: DatasetMeta) -> Result<Self, DataError> {
        let mut index = HashMap::with_capacity(pairs.len());
        for (i, pair) in pairs.iter().enumerate() {
            pair.validate()?;
            if index.insert(pair.pair_id.clone(), i).is_some() {
                return Err(DataError::DuplicatePairId(pair.pair_id.clone()));
            }
        }
        Ok(Dataset { pairs, meta, index })
    }

    pub fn from_pairs(pairs: Vec<QaPair>) -> Result<Self, DataError> {
        Self::new(pairs, DatasetMeta::default())
    }

    pub fn pairs(&self) -> &[QaPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, QaPair> {
        self.pairs.iter()
    }

    pub fn get(&self, pair_id: &str) -> Option<&QaPair> {
        self.index.get(pair_id).map(|&i| &self.pairs[i])
    }

    pub fn position(&self, pair_id: &str) -> Option<usize> {
        self.index.get(pair_id).copied()
    }

    pub fn into_pairs(self) -> Vec<QaPair> {
        self.pairs
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a QaPair;
    type IntoIter = std::slice::Iter<'a, QaPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Scores of every pair at one saved checkpoint.
///
/// Each vector holds one average masked negative log-likelihood (nats) per
/// option, in option order. Lower is more plausible.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointScoreMatrix {
    pub checkpoint: u32,
    pub scores: IndexMap<String, Vec<f64>>,
}

impl CheckpointScoreMatrix {
    pub fn new(checkpoint: u32) -> Self {
        CheckpointScoreMatrix {
            checkpoint,
            scores: IndexMap::new(),
        }
    }

    pub fn get(&self, pair_id: &str) -> Option<&[f64]> {
        self.scores.get(pair_id).map(Vec::as_slice)
    }
}

/// Confidence and variability of one pair across checkpoints.
///
/// `*_var` fields hold the population standard deviation (divisor `E`) of
/// the matching per-checkpoint quantity, following the cartography
/// convention of calling it variability. Distractor vectors follow option
/// order with the answer skipped (see [`QaPair::distractor_indices`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRecord {
    pub pair_id: String,
    pub answer_index: usize,
    pub num_options: usize,
    pub checkpoints: usize,
    pub answer_confidence_mean: f64,
    pub answer_confidence_var: f64,
    pub per_distractor_confidence_mean: Vec<f64>,
    pub per_distractor_confidence_var: Vec<f64>,
    pub pair_confidence_mean: f64,
    pub pair_confidence_var: f64,
    pub softmax_answer_confidence_mean: f64,
    pub softmax_answer_confidence_var: f64,
    /// True for two-option pairs, where the pairwise answer confidence is
    /// undefined and the softmax baseline stands in for it.
    #[serde(default)]
    pub softmax_fallback: bool,
}

impl DynamicsRecord {
    /// Option index of the k-th distractor statistic.
    pub fn distractor_option_index(&self, k: usize) -> usize {
        if k < self.answer_index {
            k
        } else {
            k + 1
        }
    }

    pub fn matches(&self, pair: &QaPair) -> bool {
        self.pair_id == pair.pair_id
            && self.answer_index == pair.answer_index
            && self.num_options == pair.arity()
    }
}
