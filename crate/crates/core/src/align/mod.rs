//! Alignment objectives: the three-way volume loss, the pooled
//! functional-group loss, an optional pairwise InfoNCE term and the
//! momentum weighting between global and local terms.
//!
//! Each loss exists twice: as a graph builder on a [`Tape`](crate::tensor::Tape)
//! (what training differentiates) and as a plain value function that runs
//! the same builder on constants.

mod graph;
mod momentum;
mod values;

pub use graph::{
    apply_temperature, global_loss_graph, infonce_graph, learnable_tau, local_loss_graph, GlobalNodes, LocalNodes,
    Temperature,
};
pub use momentum::{combined_loss, momentum_update, MomentumState};
pub use values::{
    gram_volume, global_loss, local_loss, pairwise_infonce, pool_fg, volume_matrix, FGBatchItem, GlobalLoss,
    LocalLoss, LossBreakdown, Pair,
};

use thiserror::Error;

use crate::tensor::PoolMode;

pub const TAU_MIN: f64 = 0.01;
pub const TAU_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("vector length {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("cannot pool an empty list of vectors")]
    EmptyList,
    #[error("item {item} has {fg} structure vectors but {fgt} description vectors")]
    MismatchedCounts { item: usize, fg: usize, fgt: usize },
    #[error("invalid alignment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub tau: f64,
    pub tau_learnable: bool,
    pub label_smoothing: f64,
    pub aux_infonce: bool,
    pub volume_grad_eps: f64,
    pub pooling: PoolMode,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            tau: 0.07,
            tau_learnable: false,
            label_smoothing: 0.1,
            aux_infonce: false,
            volume_grad_eps: 1e-8,
            pooling: PoolMode::Max,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(AlignError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(AlignError::InvalidConfig(format!(
                "label_smoothing must be in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if !(self.volume_grad_eps >= 0.0) {
            return Err(AlignError::InvalidConfig("volume_grad_eps must be >= 0".into()));
        }
        Ok(())
    }
}
