//! Training-dynamics diagnostics for multiple-choice QA datasets built from
//! commonsense knowledge triples.
//!
//! The pipeline has five stages, each in its own module:
//!
//! * [`synthesis`] turns `(head, relation, tail)` triples into QA pairs with
//!   templated questions and keyword-filtered distractors.
//! * [`scorer`] defines the masked-sequence score contract and ships a small
//!   unigram model trained with a margin ranking loss, so checkpoint score
//!   logs can be produced without an external ML stack.
//! * [`dynamics`] turns per-checkpoint scores into option- and pair-level
//!   confidence and variability.
//! * [`selection`] drops easy distractors, removes mislabeled and
//!   false-negative pairs, and restricts to learnability regions.
//! * [`report`] renders data maps and confidence-gap histograms.
//!
//! [`format`] holds the line-delimited JSON readers and writers shared by all
//! of them. Per-pair work runs on rayon when the `parallel` feature (on by
//! default) is enabled; results are identical either way.

pub mod config;
pub mod data;
pub mod dynamics;
pub mod format;
pub mod report;
pub mod scorer;
pub mod selection;
pub mod synthesis;
pub mod toy_corpus;

mod par;

pub use data::{
    CheckpointScoreMatrix, DataError, Dataset, DatasetMeta, DynamicsRecord, KnowledgeTriple,
    QaPair,
};
pub use par::parallel_enabled;
