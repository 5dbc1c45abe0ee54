//! Corpus loading, dataset splits, the training loop and checkpoints.

use std::path::PathBuf;

use thiserror::Error;

use crate::align::AlignError;
use crate::encode::EncodeError;
use crate::tensor::TensorError;

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod fit;
pub mod model;
pub mod split;
pub mod synth;

pub use checkpoint::{checkpoint_path, decay_mask, Checkpoint, TrainState, CHECKPOINT_VERSION};
pub use config::{ConfigError, EncoderMode, TrainConfig, CONFIG_KEYS};
pub use data::{hta_flatten, load_triplets, parse_triplets, Reject, RejectReport, TripletRecord, MIN_TEXT_CHARS};
pub use fit::{
    epoch_batches, evaluate_loss, fit, fit_with_dims, initial_state, is_validation_id, EpochMetrics, FitResult, FINAL_CHECKPOINT,
    METRICS_FILE, METRICS_HEADER,
};
pub use model::{batch_graph, embed, BatchGraph, Encoder, Model, RawFeatures};
pub use split::{record_scaffold, scaffold_groups, smiles_scaffold, split_dataset, split_indices, Split, SplitMode};
pub use synth::synthetic_corpus;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}:{line}: {message}", path.display())]
    MalformedLine { path: PathBuf, line: usize, message: String },
    #[error("{}: no usable records", path.display())]
    EmptyCorpus { path: PathBuf },
    #[error("taxonomy annotation does not follow the schema: {0}")]
    SchemaViolation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: u64, batch: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{}: unreadable checkpoint: {reason}", path.display())]
    BadCheckpoint { path: PathBuf, reason: String },
    #[error("{}: checkpoint was written under a different configuration", path.display())]
    ConfigMismatch { path: PathBuf },
    #[error("no {modality} embedding for {id:?}")]
    MissingEmbedding { modality: String, id: String },
}
