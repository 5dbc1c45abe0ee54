//! Checkpoint files.
//!
//! Layout (little-endian): magic `TRICKPT1`, u32 version, 32-byte config
//! digest, u32 tensor count, then per tensor: u16 name length, UTF-8 name,
//! u32 rank, rank × u32 dims, f64 values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::model::Model;
use super::TrainError;
use crate::align::MomentumState;
use crate::tensor::{AdamState, Tensor};

const MAGIC: &[u8; 8] = b"TRICKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub digest: [u8; 32],
    /// Named tensors in file order.
    pub tensors: Vec<(String, Tensor)>,
}

fn bad(path: &Path, reason: impl Into<String>) -> TrainError {
    TrainError::BadCheckpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.version.to_le_bytes());
        buf.extend_from_slice(&self.digest);
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn write(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, self.to_bytes()).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Checkpoint, TrainError> {
        let bytes = fs::read(path).map_err(|source| TrainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|r| bad(path, r))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, String> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], String> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or("truncated checkpoint")?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err("bad magic".into());
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let digest: [u8; 32] = take(32)?.try_into().unwrap();
        let count = u32_at(take(4)?);
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = take(2)?;
            let len = u16::from_le_bytes([len[0], len[1]]) as usize;
            let name = std::str::from_utf8(take(len)?)
                .map_err(|_| "tensor name is not UTF-8")?
                .to_string();
            let rank = u32_at(take(4)?) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32_at(take(4)?) as usize);
            }
            let n: usize = shape.iter().product();
            let raw = take(n.checked_mul(8).ok_or("tensor too large")?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor::new(shape, data).unwrap()));
        }
        if pos != bytes.len() {
            return Err("trailing bytes after tensor table".into());
        }
        Ok(Checkpoint {
            version,
            digest,
            tensors,
        })
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub adam: AdamState,
    pub momentum: MomentumState,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimizer steps.
    pub step: u64,
    pub best_val: f64,
    pub bad_epochs: u64,
}

impl TrainState {
    pub fn to_checkpoint(&self, cfg: &TrainConfig) -> Checkpoint {
        let scalar = |n: &str, v: f64| (n.to_string(), Tensor::scalar(v));
        let mut tensors = vec![
            scalar("meta.epoch", self.epoch as f64),
            scalar("meta.step", self.step as f64),
            scalar("meta.alpha", self.momentum.alpha),
            scalar("meta.tau", self.model.tau(cfg.tau)),
            scalar("meta.best_val", self.best_val),
            scalar("meta.bad_epochs", self.bad_epochs as f64),
            scalar("meta.adam_t", self.adam.t as f64),
        ];
        let names = self.model.param_names();
        for (n, p) in names.iter().zip(self.model.params()) {
            tensors.push((n.clone(), p.clone()));
        }
        for (n, m) in names.iter().zip(&self.adam.m) {
            tensors.push((format!("adam.m.{n}"), m.clone()));
        }
        for (n, v) in names.iter().zip(&self.adam.v) {
            tensors.push((format!("adam.v.{n}"), v.clone()));
        }
        Checkpoint {
            version: CHECKPOINT_VERSION,
            digest: cfg.digest(),
            tensors,
        }
    }

    /// Restores state; the checkpoint must come from the same config.
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: &TrainConfig, path: &Path) -> Result<TrainState, TrainError> {
        if ckpt.digest != cfg.digest() {
            return Err(TrainError::ConfigMismatch { path: path.to_path_buf() });
        }
        let meta = |n: &str| {
            ckpt.get(&format!("meta.{n}"))
                .map(Tensor::item)
                .ok_or_else(|| bad(path, format!("missing meta.{n}")))
        };
        let named: BTreeMap<String, Tensor> = ckpt.tensors.iter().cloned().collect();
        let model = Model::from_named(&named, cfg.dropout).map_err(|r| bad(path, r))?;
        if model.hta.is_none() != cfg.share_text_head || model.log_tau.is_some() != cfg.tau_learnable {
            return Err(TrainError::ConfigMismatch { path: path.to_path_buf() });
        }
        let names = model.param_names();
        let moment = |kind: &str| -> Result<Vec<Tensor>, TrainError> {
            names
                .iter()
                .map(|n| {
                    named
                        .get(&format!("adam.{kind}.{n}"))
                        .cloned()
                        .ok_or_else(|| bad(path, format!("missing adam.{kind}.{n}")))
                })
                .collect()
        };
        let mut adam = AdamState::new(cfg.adam(), &model.params().into_iter().cloned().collect::<Vec<_>>());
        adam.m = moment("m")?;
        adam.v = moment("v")?;
        adam.t = meta("adam_t")? as u64;
        adam.decay = decay_mask(&names);
        Ok(TrainState {
            momentum: MomentumState {
                alpha: meta("alpha")?,
                beta: cfg.beta,
                alpha0: cfg.alpha0,
            },
            epoch: meta("epoch")? as u64,
            step: meta("step")? as u64,
            best_val: meta("best_val")?,
            bad_epochs: meta("bad_epochs")? as u64,
            model,
            adam,
        })
    }
}

/// Weight decay applies to head parameters, not to the temperature.
pub fn decay_mask(names: &[String]) -> Vec<bool> {
    names.iter().map(|n| n != "log_tau").collect()
}

pub fn checkpoint_path(dir: &Path, epoch: u64) -> PathBuf {
    dir.join(format!("checkpoint_epoch{epoch:04}.ckpt"))
}
