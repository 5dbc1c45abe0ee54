//! Retrieval recall over the aligned space, binary-classification metrics
//! and a logistic-regression probe on frozen features.

use thiserror::Error;

use crate::align::AlignError;

mod labeled;
mod metrics;
mod probe;
mod retrieval;

pub use labeled::{load_labeled, parse_labeled, LabeledItem, LabeledSet, SplitName};
pub use metrics::{accuracy, roc_auc, sample_std};
pub use probe::{linear_probe, ProbeConfig, ProbeResult, SeedScore};
pub use retrieval::{random_baseline, retrieval_metrics, Direction, RetrievalReport, Scoring};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("retrieval needs at least 2 items, got {0}")]
    PoolTooSmall(usize),
    #[error("both classes are required: {0}")]
    DegenerateLabels(String),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
}
