//! Raw embeddings for each modality and the trainable projection heads that
//! map them into the shared alignment space.

mod head;
mod store;
mod toy;

pub use head::{project, project_batch, HeadDims, HeadNodes, ProjectionHead, HEAD_PARAM_NAMES};
pub use store::{load_embeddings, write_embeddings, EmbeddingBundle, EmbeddingStore, Modality};
pub use toy::{toy_encode, ToyEncoderConfig, TOY_HASH_SEED};

use std::path::PathBuf;

use thiserror::Error;

pub const RAW_DIM: usize = 768;
pub const SHARED_DIM: usize = 512;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("cannot encode empty input")]
    EmptyInput,
    #[error("expected a vector of length {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{path}: not an embedding file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported embedding file version {version}")]
    BadVersion { path: PathBuf, version: u32 },
    #[error("{path}: file ends in the middle of record {record}")]
    TruncatedFile { path: PathBuf, record: u64 },
    #[error("embedding dimension {found} does not match expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("id {0:?} is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("{path}: invalid UTF-8 id in record {record}")]
    BadId { path: PathBuf, record: u64 },
    #[error("refusing to write an empty embedding store")]
    EmptyStore,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
