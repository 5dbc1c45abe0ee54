//! Tri-modal contrastive alignment of molecules (SMILES), free-text
//! descriptions and hierarchical taxonomy annotations.
//!
//! Modules, bottom-up:
//! - [`chem`]: SMILES graphs, functional-group matching, Murcko scaffolds
//! - [`tensor`]: reverse-mode differentiation over dense f64 matrices, Adam
//! - [`encode`]: toy/file encoders and the trainable projection heads
//! - [`align`]: volume, global, local and auxiliary losses, momentum weighting
//! - [`train`]: data loading, splits, the training loop and checkpoints
//! - [`eval`]: retrieval recall and the linear-probe metrics
//! - [`cli`]: command-line front end

pub mod chem;
pub mod tensor;
pub mod encode;
pub mod align;
pub mod rng;
pub mod train;
pub mod eval;
pub mod cli;
