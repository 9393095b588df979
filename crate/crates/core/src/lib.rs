//! Multilayer perceptron training on Balanced EMNIST with PCA compression
//! and training-set pruning.
//!
//! Everything runs in `f64` on dense row-major matrices. All randomness flows
//! from explicit seeds, so identical inputs give identical results.

pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod pca;
pub mod prune;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, RngState};
