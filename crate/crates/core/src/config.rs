//! One TOML file configuring every pipeline stage.
//!
//! ```toml
//! [synthesis]
//! options = 3
//! seed = 7
//!
//! [train]
//! epochs = 5
//! learning_rate = 1.0
//!
//! [selection]
//! mislabeled_threshold = 0.4
//!
//! [report]
//! bins = 40
//! ```
//!
//! Every key is optional; missing keys take their defaults and unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scorer::{MarginSign, TrainRun};
use crate::selection::SelectionConfig;
use crate::synthesis::SynthesisConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Toy model training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u32,
    pub margin: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub margin_sign: MarginSign,
    pub learning_rate: f64,
    /// Pseudo-count added to every token count in the initial model.
    pub smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let run = TrainRun::default();
        TrainConfig {
            epochs: run.epochs,
            margin: run.margin,
            seed: run.seed,
            batch_size: run.batch_size,
            margin_sign: run.margin_sign,
            learning_rate: 1.0,
            smoothing: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn run(&self) -> TrainRun {
        TrainRun {
            epochs: self.epochs,
            margin: self.margin,
            seed: self.seed,
            batch_size: self.batch_size,
            margin_sign: self.margin_sign,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.run().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError::Invalid("learning_rate must be non-negative".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(ConfigError::Invalid("smoothing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Histogram bins over [−1, 1].
    pub bins: usize,
    /// Region fraction used when labelling the data map.
    pub region_fraction: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { bins: 40, region_fraction: 0.33 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub synthesis: SynthesisConfig,
    pub train: TrainConfig,
    pub selection: SelectionConfig,
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("pipeline config always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.synthesis.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.validate()?;
        self.selection.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.report.bins < 2 {
            return Err(ConfigError::Invalid("report.bins must be >= 2".into()));
        }
        if !(self.report.region_fraction > 0.0 && self.report.region_fraction <= 1.0) {
            return Err(ConfigError::Invalid("report.region_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_sections() {
        let cfg = PipelineConfig::from_toml_str(
            "[synthesis]\nseed = 9\n[train]\nepochs = 2\nmargin_sign = \"answer-above\"\n[selection]\nregion = \"hard\"\nregion_fraction = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.synthesis.seed, 9);
        assert_eq!(cfg.synthesis.options, 3);
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.margin_sign, MarginSign::AnswerAbove);
        assert_eq!(cfg.selection.region_fraction, 0.5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(PipelineConfig::from_toml_str("[train]\nepoch = 2\n").is_err());
        assert!(PipelineConfig::from_toml_str("[nope]\n").is_err());
    }

    #[test]
    fn roundtrip() {
        let mut cfg = PipelineConfig::default();
        cfg.train.learning_rate = 2.5;
        cfg.selection.mislabeled = true;
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        let mut cfg = PipelineConfig::default();
        cfg.train.learning_rate = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.report.bins = 1;
        assert!(cfg.validate().is_err());
    }
}
