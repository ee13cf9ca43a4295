//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snoic_core::encoder::EncoderConfig;
use snoic_core::trainer::TrainConfig;

use crate::error::{Error, Result};
use crate::io;

/// Environment variable that replaces `training.seed`.
pub const SEED_ENV: &str = "SNOIC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub min_freq: usize,
    pub max_size: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self { min_freq: 1, max_size: 10_000 }
    }
}

/// One experiment. Relative data paths are resolved against the directory
/// of the config file when it is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name used to group runs in reports.
    pub dataset: String,
    pub data: DataPaths,
    /// Expected known-class ratio; checked against the split when present.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default = "full_ratio")]
    pub labeled_data_ratio: f64,
    #[serde(default)]
    pub vocab: VocabConfig,
}

fn full_ratio() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let usage = |e: snoic_core::Error| Error::Usage(e.to_string());
        if self.dataset.trim().is_empty() {
            return Err(Error::Usage("config `dataset` is empty".into()));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Usage(format!("config r {r} outside (0, 1)")));
            }
        }
        if !(self.labeled_data_ratio > 0.0 && self.labeled_data_ratio <= 1.0) {
            return Err(Error::Usage(format!("labeled_data_ratio {} outside (0, 1]", self.labeled_data_ratio)));
        }
        if self.vocab.min_freq < 1 || self.vocab.max_size < 3 {
            return Err(Error::Usage("vocab needs min_freq >= 1 and max_size >= 3".into()));
        }
        self.training.validate().map_err(usage)?;
        let enc = EncoderConfig { vocab_size: self.encoder.vocab_size.max(3), ..self.encoder.clone() };
        enc.validate().map_err(usage)
    }

    /// Replaces the training seed when `value` is set.
    pub fn with_seed_override(mut self, value: Option<&str>) -> Result<Self> {
        if let Some(v) = value {
            self.training.seed =
                v.trim().parse().map_err(|_| Error::Usage(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.train, &mut self.data.val, &mut self.data.test] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Loads, resolves, applies the seed override from the environment and
/// validates. Any problem here is a usage error.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let bytes = std::fs::read(path).map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Usage(format!("invalid config {}: {e}", path.display())))?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
    let cfg = cfg.with_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    io::write_json(path, cfg)
}
