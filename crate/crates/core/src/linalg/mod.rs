//! Dense row-major matrices and the seeded random source.

mod matrix;
mod rng;

pub use matrix::{argmax, Axis, DenseMatrix, Reduce};
pub use rng::RngState;
