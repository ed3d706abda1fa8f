//! Training configuration files (TOML).
//!
//! ```toml
//! seed = 0
//!
//! [model]            # ModelConfig
//! sources = 2
//! encoder_kernel = 8
//! embed_dim = 64
//! blocks = 2
//! chunk_size = 8
//! qk_dim = 32
//! bottleneck_dim = 32
//! memory_blocks = 2
//! # expansion = 2, rotary = true, memory_kernel = 5, memory_groups = <memory width>, hybrid = true
//!
//! [model.ablation]   # all default to true
//! dilation = true
//! dense = true
//! gate = true
//! conv_u = true
//! bottleneck = true
//!
//! [train]            # TrainSettings, every key optional
//! lr = 15e-5
//! plateau_epochs = 85
//! decay_factor = 0.5
//! decay_window = 85
//! clip_norm = 5.0
//! max_epochs = 200
//! batch_size = 1
//! dynamic_mixing = false
//! # target_si_sdri = 10.0   stop once the epoch mean reaches it
//!
//! [data]             # CorpusSpec, every key optional
//! count = 4
//! duration_s = 1.0
//! sources = 2
//! seed = 0
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CorpusSpec;
use crate::separator::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub lr: f64,
    /// Epochs at the initial rate before the first reduction.
    pub plateau_epochs: usize,
    pub decay_factor: f64,
    /// Epochs between later reductions; defaults to `plateau_epochs`.
    pub decay_window: Option<usize>,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Draw a fresh remix of the training sources at every step.
    pub dynamic_mixing: bool,
    /// Early stop once an epoch's mean training SI-SDRi reaches this value.
    pub target_si_sdri: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            lr: 15e-5,
            plateau_epochs: 85,
            decay_factor: 0.5,
            decay_window: None,
            clip_norm: 5.0,
            max_epochs: 200,
            batch_size: 1,
            dynamic_mixing: false,
            target_si_sdri: None,
        }
    }
}

impl TrainSettings {
    /// Learning rate of 1-based `epoch`: constant through `plateau_epochs`,
    /// then multiplied by `decay_factor` once per started window.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch <= self.plateau_epochs {
            return self.lr;
        }
        let window = self.decay_window.unwrap_or(self.plateau_epochs).max(1);
        let reductions = (epoch - self.plateau_epochs).div_ceil(window);
        self.lr * self.decay_factor.powi(reductions as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub data: CorpusSpec,
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, reason } => Error::Config { field: format!("{section}.{field}"), reason },
        other => other,
    }
}

impl TrainConfig {
    /// Desk profile with a four-mixture synthetic corpus.
    pub fn desk() -> Self {
        Self { seed: 0, model: ModelConfig::desk(), train: TrainSettings::default(), data: CorpusSpec::default() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(Error::config("train.lr", "must be positive"));
        }
        if !(t.decay_factor > 0.0 && t.decay_factor < 1.0) {
            return Err(Error::config("train.decay_factor", "must be in (0, 1)"));
        }
        if !(t.clip_norm > 0.0) {
            return Err(Error::config("train.clip_norm", "must be positive"));
        }
        if t.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be ≥ 1"));
        }
        if t.max_epochs == 0 {
            return Err(Error::config("train.max_epochs", "must be ≥ 1"));
        }
        if t.decay_window == Some(0) {
            return Err(Error::config("train.decay_window", "must be ≥ 1"));
        }
        self.model.validate().map_err(|e| prefixed("model", e))?;
        self.data.validate().map_err(|e| prefixed("data", e))?;
        if self.data.sources != self.model.sources {
            return Err(Error::config("data.sources", format!("must equal model.sources = {}", self.model.sources)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_holds_then_halves() {
        let t = TrainSettings::default();
        assert_eq!(t.lr_at(1), 15e-5);
        assert_eq!(t.lr_at(85), 15e-5);
        assert!((t.lr_at(86) - 7.5e-5).abs() < 1e-18);
        assert!((t.lr_at(170) - 7.5e-5).abs() < 1e-18);
        assert!((t.lr_at(171) - 3.75e-5).abs() < 1e-18);
        let t = TrainSettings { decay_window: Some(1), ..t };
        assert!((t.lr_at(87) - 3.75e-5).abs() < 1e-18);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = TrainConfig::desk();
        assert_eq!(TrainConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid_fields() {
        let text = TrainConfig::desk().to_toml().replace("embed_dim", "embed_dims");
        let err = TrainConfig::parse(&text).unwrap_err();
        assert!(matches!(&err, Error::ConfigParse(m) if m.contains("embed_dims")), "{err}");
        let mut cfg = TrainConfig::desk();
        cfg.train.decay_factor = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "train.decay_factor"));
        cfg = TrainConfig::desk();
        cfg.model.encoder_kernel = 7;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "model.encoder_kernel"));
    }
}
