//! Dataset ingestion, normalisation, splitting, batching and persistence.

mod dataset;
pub mod emds;
pub mod idx;
mod split;

pub use dataset::{permutation, Batch, Dataset, FeatureScale, NUM_CLASSES};
pub use emds::{load_bin, save_bin};
pub use idx::{load_emnist_pooled, load_idx, load_idx_with, Orientation};
pub use split::{stratified_split, SplitSpec};
