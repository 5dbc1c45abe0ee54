//! Flat `key=value` training configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::AlignConfig;
use crate::tensor::{AdamConfig, PoolMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key {key:?}")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: expected key=value, got {text:?}")]
    BadLine { text: String, line: usize },
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderMode {
    #[default]
    Toy,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub tau: f64,
    pub tau_learnable: bool,
    pub beta: f64,
    pub alpha0: f64,
    pub label_smoothing: f64,
    pub dropout: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub encoder: EncoderMode,
    /// Directory of `.emb` files for the file encoder.
    pub embeddings: Option<PathBuf>,
    pub pooling: PoolMode,
    pub aux_infonce: bool,
    pub share_text_head: bool,
    pub checkpoint_every: usize,
    /// Fill the `seconds` metrics column with wall time instead of 0.
    pub record_time: bool,
    pub ngram: usize,
    pub resume: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 40,
            weight_decay: 1e-4,
            epochs: 60,
            early_stop_patience: 5,
            tau: 0.07,
            tau_learnable: false,
            beta: 0.9,
            alpha0: 0.5,
            label_smoothing: 0.1,
            dropout: 0.1,
            grad_clip: 1.0,
            seed: 0,
            encoder: EncoderMode::Toy,
            embeddings: None,
            pooling: PoolMode::Max,
            aux_infonce: false,
            share_text_head: false,
            checkpoint_every: 2,
            record_time: false,
            ngram: 3,
            resume: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 22] = [
    "learning_rate",
    "batch_size",
    "weight_decay",
    "epochs",
    "early_stop_patience",
    "tau",
    "tau_learnable",
    "beta",
    "alpha0",
    "label_smoothing",
    "dropout",
    "grad_clip",
    "seed",
    "encoder",
    "embeddings",
    "pooling",
    "aux_infonce",
    "share_text_head",
    "checkpoint_every",
    "record_time",
    "ngram",
    "resume",
];

/// Keys left out of the digest: they do not change the trajectory.
const UNDIGESTED: [&str; 2] = ["epochs", "resume"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

impl TrainConfig {
    /// Parses a config file body on top of the defaults. `#` starts a
    /// comment; blank lines are ignored.
    pub fn from_kv_text(text: &str) -> Result<TrainConfig, ConfigError> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::BadLine {
                    text: raw.to_string(),
                    line: i + 1,
                });
            };
            cfg.set(k.trim(), v.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { key, line: i + 1 },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "early_stop_patience" => self.early_stop_patience = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "tau_learnable" => self.tau_learnable = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "alpha0" => self.alpha0 = parse(key, value)?,
            "label_smoothing" => self.label_smoothing = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "grad_clip" => self.grad_clip = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "encoder" => {
                self.encoder = match value {
                    "toy" => EncoderMode::Toy,
                    "file" => EncoderMode::File,
                    _ => return Err(invalid(key, value, "expected toy or file")),
                }
            }
            "embeddings" => self.embeddings = (!value.is_empty()).then(|| PathBuf::from(value)),
            "pooling" => {
                self.pooling = match value {
                    "max" => PoolMode::Max,
                    "mean" => PoolMode::Mean,
                    _ => return Err(invalid(key, value, "expected max or mean")),
                }
            }
            "aux_infonce" => self.aux_infonce = parse(key, value)?,
            "share_text_head" => self.share_text_head = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            "record_time" => self.record_time = parse(key, value)?,
            "ngram" => self.ngram = parse(key, value)?,
            "resume" => self.resume = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line: 0,
                })
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "learning_rate" => self.learning_rate.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "epochs" => self.epochs.to_string(),
            "early_stop_patience" => self.early_stop_patience.to_string(),
            "tau" => self.tau.to_string(),
            "tau_learnable" => self.tau_learnable.to_string(),
            "beta" => self.beta.to_string(),
            "alpha0" => self.alpha0.to_string(),
            "label_smoothing" => self.label_smoothing.to_string(),
            "dropout" => self.dropout.to_string(),
            "grad_clip" => self.grad_clip.to_string(),
            "seed" => self.seed.to_string(),
            "encoder" => match self.encoder {
                EncoderMode::Toy => "toy".into(),
                EncoderMode::File => "file".into(),
            },
            "embeddings" => path(&self.embeddings),
            "pooling" => match self.pooling {
                PoolMode::Max => "max".into(),
                PoolMode::Mean => "mean".into(),
            },
            "aux_infonce" => self.aux_infonce.to_string(),
            "share_text_head" => self.share_text_head.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "record_time" => self.record_time.to_string(),
            "ngram" => self.ngram.to_string(),
            "resume" => path(&self.resume),
            _ => return None,
        })
    }

    /// Every key in canonical order, one `key=value` per line.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        for k in CONFIG_KEYS {
            writeln!(out, "{k}={}", self.get(k).unwrap()).unwrap();
        }
        out
    }

    /// SHA-256 of the canonical text, without run-length and resume keys.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for k in CONFIG_KEYS.iter().filter(|k| !UNDIGESTED.contains(k)) {
            h.update(format!("{k}={}\n", self.get(k).unwrap()));
        }
        h.finalize().into()
    }

    /// Checks ranges. Returns warnings for legal but degenerate settings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let check = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(invalid(key, &self.get(key).unwrap(), reason))
            }
        };
        check(self.learning_rate > 0.0, "learning_rate", "must be positive")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.weight_decay >= 0.0, "weight_decay", "must be non-negative")?;
        check(self.epochs >= 1, "epochs", "must be at least 1")?;
        check(self.early_stop_patience >= 1, "early_stop_patience", "must be at least 1")?;
        check(self.tau > 0.0, "tau", "must be positive")?;
        check((0.0..1.0).contains(&self.beta), "beta", "must be in [0, 1)")?;
        check((0.0..=1.0).contains(&self.alpha0), "alpha0", "must be in [0, 1]")?;
        check((0.0..1.0).contains(&self.label_smoothing), "label_smoothing", "must be in [0, 1)")?;
        check((0.0..1.0).contains(&self.dropout), "dropout", "must be in [0, 1)")?;
        check(self.grad_clip > 0.0, "grad_clip", "must be positive")?;
        check(self.checkpoint_every >= 1, "checkpoint_every", "must be at least 1")?;
        check(self.ngram >= 1, "ngram", "must be at least 1")?;
        check(
            self.encoder == EncoderMode::Toy || self.embeddings.is_some(),
            "embeddings",
            "file encoder needs an embeddings directory",
        )?;
        let mut warnings = Vec::new();
        if self.batch_size == 1 {
            warnings.push("batch_size=1 gives no in-batch negatives; contrastive losses are zero".to_string());
        }
        Ok(warnings)
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig {
            tau: self.tau,
            tau_learnable: self.tau_learnable,
            label_smoothing: self.label_smoothing,
            aux_infonce: self.aux_infonce,
            volume_grad_eps: 1e-8,
            pooling: self.pooling,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}
