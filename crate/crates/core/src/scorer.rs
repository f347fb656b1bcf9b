//! Sequence scoring, margin ranking loss, and a desk-scale trainer.
//!
//! A sequence `T = question ⊕ option` is scored by masking each token in turn
//! and averaging the negative log-likelihood of the masked token:
//!
//! ```text
//! S(T) = −(1/n) Σᵢ log P(tᵢ | t₁ … tᵢ₋₁, tᵢ₊₁ … tₙ)
//! ```
//!
//! Lower is more plausible. Any model exposing [`MaskedLm`] can be scored;
//! [`ToyModel`] is a smoothed unigram model whose conditional ignores the
//! context, which is enough to produce evolving checkpoint dynamics without an
//! ML framework.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CheckpointScoreMatrix, Dataset};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("cannot score an empty token sequence")]
    EmptySequence,
    #[error("score matrix has no scores for pair '{0}'")]
    MissingPair(String),
    #[error("pair '{pair_id}' has {expected} options but {found} scores")]
    ArityMismatch {
        pair_id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

/// A masked language model: log-probability of the token at `position`
/// given every other token of the sequence.
pub trait MaskedLm {
    fn masked_log_prob(&self, tokens: &[&str], position: usize) -> f64;
}

/// Average masked negative log-likelihood of `tokens`, in nats.
pub fn masked_sequence_score<M: MaskedLm + ?Sized>(tokens: &[&str], model: &M) -> Result<f64, ScoreError> {
    if tokens.is_empty() {
        return Err(ScoreError::EmptySequence);
    }
    let total: f64 = (0..tokens.len()).map(|i| model.masked_log_prob(tokens, i)).sum();
    Ok(-total / tokens.len() as f64)
}

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Reserved vocabulary entry that absorbs out-of-vocabulary tokens.
pub const UNK: &str = "<unk>";

/// Smoothed unigram model with positive token weights.
///
/// `P(t) = w_t / Σ_v w_v` over the vocabulary, which always contains
/// [`UNK`]. Scaling every weight by the same factor leaves all probabilities
/// unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    vocabulary: Vec<String>,
    weights: Vec<f64>,
    pub smoothing: f64,
    pub learning_rate: f64,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ToyModel {
    /// Initial weights are token counts over every question and option plus
    /// `smoothing`; [`UNK`] starts at `smoothing`.
    pub fn from_dataset(dataset: &Dataset, smoothing: f64, learning_rate: f64) -> Self {
        let mut counts: HashMap<String, f64> = HashMap::new();
        for pair in dataset {
            for text in std::iter::once(&pair.question).chain(&pair.options) {
                for tok in tokenize(text) {
                    *counts.entry(tok).or_insert(0.0) += 1.0;
                }
            }
        }
        let mut tokens: Vec<(String, f64)> = counts.into_iter().collect();
        tokens.sort_by(|a, b| a.0.cmp(&b.0));
        Self::build(tokens.into_iter().map(|(t, c)| (t, c + smoothing)), smoothing, learning_rate)
    }

    /// Every listed token gets weight 1, [`UNK`] included.
    pub fn uniform<S: AsRef<str>>(tokens: &[S], learning_rate: f64) -> Self {
        Self::build(tokens.iter().map(|t| (t.as_ref().to_owned(), 1.0)), 1.0, learning_rate)
    }

    fn build(entries: impl Iterator<Item = (String, f64)>, smoothing: f64, learning_rate: f64) -> Self {
        let mut vocabulary = vec![UNK.to_owned()];
        let mut weights = vec![smoothing];
        for (tok, w) in entries {
            if tok == UNK {
                weights[0] = w;
                continue;
            }
            vocabulary.push(tok);
            weights.push(w);
        }
        let mut model = ToyModel {
            vocabulary,
            weights,
            smoothing,
            learning_rate,
            index: HashMap::new(),
        };
        model.reindex();
        model
    }

    fn reindex(&mut self) {
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn restored(mut self) -> Self {
        self.reindex();
        self
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.weights[self.token_id(token)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale_weights(&mut self, factor: f64) {
        assert!(factor > 0.0 && factor.is_finite());
        for w in &mut self.weights {
            *w *= factor;
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn probability(&self, token: &str) -> f64 {
        self.weight(token) / self.total_weight()
    }

    fn log_probs(&self) -> Vec<f64> {
        let log_z = self.total_weight().ln();
        self.weights.iter().map(|w| w.ln() - log_z).collect()
    }

    fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.token_id(t)).collect()
    }
}

impl MaskedLm for ToyModel {
    fn masked_log_prob(&self, tokens: &[&str], position: usize) -> f64 {
        self.probability(&tokens[position].to_lowercase()).ln()
    }
}

/// Which way the margin ranking hinge points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginSign {
    /// `max(0, η + S_answer − S_i)`: pushes the answer's score below every
    /// distractor's by at least `η`, consistent with lower-is-better scores.
    #[default]
    AnswerBelow,
    /// `max(0, η − S_answer + S_i)`, the other orientation, kept for
    /// comparison runs. It drives the answer's score up.
    AnswerAbove,
}

fn hinge_terms(scores: &[f64], answer_index: usize, margin: f64, sign: MarginSign) -> impl Iterator<Item = (usize, f64)> + '_ {
    let sa = scores[answer_index];
    scores
        .iter()
        .enumerate()
        .filter(move |(i, _)| *i != answer_index)
        .map(move |(i, &si)| {
            let slack = match sign {
                MarginSign::AnswerBelow => margin + sa - si,
                MarginSign::AnswerAbove => margin - sa + si,
            };
            (i, slack)
        })
}

/// Mean hinge over the `m − 1` distractors.
pub fn mrl_loss(scores: &[f64], answer_index: usize, margin: f64) -> f64 {
    mrl_loss_with(scores, answer_index, margin, MarginSign::AnswerBelow)
}

pub fn mrl_loss_with(scores: &[f64], answer_index: usize, margin: f64, sign: MarginSign) -> f64 {
    assert!(scores.len() >= 2, "margin ranking loss needs at least two options");
    let total: f64 = hinge_terms(scores, answer_index, margin, sign)
        .map(|(_, s)| s.max(0.0))
        .sum();
    total / (scores.len() - 1) as f64
}

/// A subgradient of [`mrl_loss_with`] with respect to each score. At a kink
/// (slack exactly zero) the inactive side is taken.
pub fn mrl_subgradient(scores: &[f64], answer_index: usize, margin: f64, sign: MarginSign) -> Vec<f64> {
    let mut grad = vec![0.0; scores.len()];
    let unit = 1.0 / (scores.len() - 1) as f64;
    let dir = match sign {
        MarginSign::AnswerBelow => 1.0,
        MarginSign::AnswerAbove => -1.0,
    };
    let active: Vec<usize> = hinge_terms(scores, answer_index, margin, sign)
        .filter(|(_, s)| *s > 0.0)
        .map(|(i, _)| i)
        .collect();
    for i in active {
        grad[answer_index] += dir * unit;
        grad[i] -= dir * unit;
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub epochs: u32,
    pub margin: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub margin_sign: MarginSign,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun {
            epochs: 5,
            margin: 1.0,
            seed: 0,
            batch_size: 32,
            margin_sign: MarginSign::AnswerBelow,
        }
    }
}

impl TrainRun {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.epochs < 1 {
            return Err(ScoreError::Config("epochs must be >= 1".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(ScoreError::Config("margin must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(ScoreError::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Token ids of one pair, question shared across options.
struct EncodedPair {
    question: Vec<usize>,
    options: Vec<Vec<usize>>,
}

impl EncodedPair {
    fn new(model: &ToyModel, question: &str, options: &[String]) -> Self {
        EncodedPair {
            question: model.encode(question),
            options: options.iter().map(|o| model.encode(o)).collect(),
        }
    }

    /// Sequence length of option `i`, counting an empty sequence as one
    /// unknown token.
    fn len(&self, i: usize) -> usize {
        (self.question.len() + self.options[i].len()).max(1)
    }

    fn scores(&self, log_probs: &[f64]) -> Vec<f64> {
        let q: f64 = self.question.iter().map(|&t| log_probs[t]).sum();
        self.options
            .iter()
            .enumerate()
            .map(|(i, opt)| {
                let mut s = q + opt.iter().map(|&t| log_probs[t]).sum::<f64>();
                if self.question.is_empty() && opt.is_empty() {
                    s = log_probs[0];
                }
                -s / self.len(i) as f64
            })
            .collect()
    }

    /// Sparse gradient of the loss with respect to log-weights, given the
    /// loss gradient with respect to each option score.
    ///
    /// `∂S_i/∂θ_v = −c_v(T_i)/n_i + P(v)`. The `P(v)` part is multiplied by
    /// `Σ_i ∂L/∂S_i`, which is zero for the margin ranking loss, so only the
    /// tokens of the pair receive updates.
    fn token_grad(&self, score_grad: &[f64], out: &mut Vec<(usize, f64)>) {
        for (i, &g) in score_grad.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let coeff = -g / self.len(i) as f64;
            for &t in self.question.iter().chain(&self.options[i]) {
                out.push((t, coeff));
            }
            if self.question.is_empty() && self.options[i].is_empty() {
                out.push((0, coeff));
            }
        }
    }
}

/// Result of [`train_toy_model`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToyModel,
    /// One matrix per epoch, checkpoints `1..=epochs`, scored after the
    /// epoch's updates.
    pub checkpoints: Vec<CheckpointScoreMatrix>,
    /// Mean loss over the dataset, scored at each checkpoint.
    pub epoch_loss: Vec<f64>,
}

fn score_all(pairs: &[EncodedPair], ids: &[&str], log_probs: &[f64], checkpoint: u32) -> CheckpointScoreMatrix {
    let rows = par::map(pairs, |p| p.scores(log_probs));
    CheckpointScoreMatrix {
        checkpoint,
        scores: ids.iter().map(|s| s.to_string()).zip(rows).collect(),
    }
}

/// Scores every pair of `dataset` under `model`.
pub fn score_dataset(model: &ToyModel, dataset: &Dataset, checkpoint: u32) -> CheckpointScoreMatrix {
    let encoded: Vec<EncodedPair> =
        par::map(dataset.pairs(), |p| EncodedPair::new(model, &p.question, &p.options));
    let ids: Vec<&str> = dataset.iter().map(|p| p.pair_id.as_str()).collect();
    score_all(&encoded, &ids, &model.log_probs(), checkpoint)
}

/// Trains `model` on `dataset` with mini-batch subgradient descent on the
/// margin ranking loss, saving a score matrix after every epoch.
///
/// Each epoch visits the pairs in a seeded shuffled order. Per-pair gradients
/// are computed in parallel and summed in visiting order, then applied as a
/// multiplicative weight update `w ← w·exp(−lr·g)` so weights stay positive.
/// Tokens absent from the model's vocabulary map to [`UNK`].
pub fn train_toy_model(dataset: &Dataset, run: &TrainRun, mut model: ToyModel) -> Result<TrainOutcome, ScoreError> {
    run.validate()?;
    if dataset.is_empty() {
        return Err(ScoreError::Config("cannot train on an empty dataset".into()));
    }
    let encoded: Vec<EncodedPair> =
        par::map(dataset.pairs(), |p| EncodedPair::new(&model, &p.question, &p.options));
    let ids: Vec<&str> = dataset.iter().map(|p| p.pair_id.as_str()).collect();
    let answers: Vec<usize> = dataset.iter().map(|p| p.answer_index).collect();

    let mut checkpoints = Vec::with_capacity(run.epochs as usize);
    let mut epoch_loss = Vec::with_capacity(run.epochs as usize);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut grad = vec![0.0; model.weights.len()];

    for epoch in 0..run.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        for batch in order.chunks(run.batch_size) {
            let log_probs = model.log_probs();
            let parts = par::map(batch, |&i| {
                let pair = &encoded[i];
                let scores = pair.scores(&log_probs);
                let g = mrl_subgradient(&scores, answers[i], run.margin, run.margin_sign);
                let mut out = Vec::new();
                pair.token_grad(&g, &mut out);
                out
            });
            let mut touched = Vec::new();
            for (t, g) in parts.into_iter().flatten() {
                if grad[t] == 0.0 {
                    touched.push(t);
                }
                grad[t] += g;
            }
            let step = model.learning_rate / batch.len() as f64;
            for t in touched {
                model.weights[t] *= (-step * grad[t]).exp();
                grad[t] = 0.0;
            }
        }

        let log_probs = model.log_probs();
        let matrix = score_all(&encoded, &ids, &log_probs, epoch + 1);
        let loss: f64 = matrix
            .scores
            .values()
            .zip(&answers)
            .map(|(s, &a)| mrl_loss_with(s, a, run.margin, run.margin_sign))
            .sum::<f64>()
            / encoded.len() as f64;
        epoch_loss.push(loss);
        checkpoints.push(matrix);
    }
    Ok(TrainOutcome {
        model,
        checkpoints,
        epoch_loss,
    })
}

/// Fraction of pairs whose unique lowest-scoring option is the answer. Ties
/// count as wrong; an empty dataset scores 0.
pub fn evaluate_accuracy(matrix: &CheckpointScoreMatrix, dataset: &Dataset) -> Result<f64, ScoreError> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for pair in dataset {
        let scores = matrix
            .get(&pair.pair_id)
            .ok_or_else(|| ScoreError::MissingPair(pair.pair_id.clone()))?;
        if scores.len() != pair.arity() {
            return Err(ScoreError::ArityMismatch {
                pair_id: pair.pair_id.clone(),
                expected: pair.arity(),
                found: scores.len(),
            });
        }
        let sa = scores[pair.answer_index];
        if scores
            .iter()
            .enumerate()
            .all(|(i, &s)| i == pair.answer_index || s > sa)
        {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
