//! Principal component analysis through the eigendecomposition of the
//! sample covariance (normalised by `n - 1`, no whitening).

mod eigen;
mod model;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use model::{covariance, CovarianceEigen, PcaModel, Spectrum, PCA_MAGIC, PCA_VERSION};
