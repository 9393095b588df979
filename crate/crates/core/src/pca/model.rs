use std::fs;
use std::path::Path;

use super::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::linalg::{Axis, DenseMatrix, Reduce};
use crate::nn::Reader;

pub const PCA_MAGIC: &[u8; 4] = b"PCAM";
pub const PCA_VERSION: u16 = 1;

// Rows centred per covariance update; bounds the temporary to CHUNK x d.
const CHUNK: usize = 1024;

/// Eigenvalues of a sample covariance, descending, clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("spectrum"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("spectrum has non-finite values"));
        }
        values.iter_mut().for_each(|v| *v = v.max(0.0));
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Running sums of the eigenvalues divided by their total. The last entry
    /// is exactly 1 whenever the total is positive.
    pub fn cumulative_evr(&self) -> Vec<f64> {
        cumulative(&self.values, self.total())
    }

    /// Smallest component count whose cumulative ratio reaches `threshold`.
    pub fn choose_k(&self, threshold: f64) -> Result<usize> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::param(format!("variance threshold must lie in (0, 1], got {threshold}")));
        }
        let cum = self.cumulative_evr();
        Ok(cum
            .iter()
            .position(|&c| c >= threshold)
            .map_or(cum.len(), |i| i + 1))
    }
}

fn cumulative(values: &[f64], total: f64) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            if total > 0.0 {
                acc / total
            } else {
                1.0
            }
        })
        .collect()
}

/// Mean vector and `(n - 1)`-normalised covariance of the rows of `x`.
pub fn covariance(x: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::param(format!("covariance needs at least 2 samples, got {n}")));
    }
    let mean = x.reduce_axis(Axis::Rows, Reduce::Mean)?;
    let mut cov = DenseMatrix::zeros(d, d);
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let mut block = x.slice_rows(start, end);
        for r in 0..block.rows() {
            for (v, m) in block.row_mut(r).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let part = block.t_matmul(&block)?;
        cov.axpy(1.0, &part)?;
    }
    cov.scale_inplace(1.0 / (n - 1) as f64);
    Ok((mean, cov))
}

/// Full eigendecomposition of the covariance of a data set, from which models
/// of any size can be cut.
#[derive(Debug, Clone)]
pub struct CovarianceEigen {
    pub mean: Vec<f64>,
    pub spectrum: Spectrum,
    /// Unit eigenvectors as rows, sign-normalised, same order as `spectrum`.
    pub vectors: DenseMatrix,
}

impl CovarianceEigen {
    pub fn fit(x: &DenseMatrix) -> Result<Self> {
        let (mean, cov) = covariance(x)?;
        let eig = symmetric_eigen(&cov)?;
        let mut vectors = eig.vectors;
        for r in 0..vectors.rows() {
            normalize_sign(vectors.row_mut(r));
        }
        Ok(CovarianceEigen {
            mean,
            spectrum: Spectrum::new(eig.values)?,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn model(&self, k: usize) -> Result<PcaModel> {
        let d = self.dim();
        if k == 0 || k > d {
            return Err(Error::param(format!("component count must lie in 1..={d}, got {k}")));
        }
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: self.vectors.slice_rows(0, k),
            explained_variance: self.spectrum.values()[..k].to_vec(),
            total_variance: self.spectrum.total(),
        })
    }
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fitted principal component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x d`, orthonormal rows sorted by descending explained variance.
    pub components: DenseMatrix,
    pub explained_variance: Vec<f64>,
    /// Variance summed over all `d` directions, not only the kept ones.
    pub total_variance: f64,
}

impl PcaModel {
    /// Fits the top `k` components of the sample covariance of `x`.
    pub fn fit(x: &DenseMatrix, k: usize) -> Result<Self> {
        if k == 0 || k > x.cols() {
            return Err(Error::param(format!(
                "component count must lie in 1..={}, got {k}",
                x.cols()
            )));
        }
        CovarianceEigen::fit(x)?.model(k)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// `(x - mean) * componentsᵀ`
    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::shape("pca_transform", x.shape(), (x.rows(), self.dim())));
        }
        let ct = self.components.transpose();
        let mut out = DenseMatrix::zeros(x.rows(), self.n_components());
        for start in (0..x.rows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(x.rows());
            let mut block = x.slice_rows(start, end);
            for r in 0..block.rows() {
                for (v, m) in block.row_mut(r).iter_mut().zip(&self.mean) {
                    *v -= m;
                }
            }
            let z = block.matmul(&ct)?;
            let k = self.n_components();
            out.as_mut_slice()[start * k..end * k].copy_from_slice(z.as_slice());
        }
        Ok(out)
    }

    /// `z * components + mean`
    pub fn inverse_transform(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.cols() != self.n_components() {
            return Err(Error::shape(
                "pca_inverse_transform",
                z.shape(),
                (z.rows(), self.n_components()),
            ));
        }
        let mut out = z.matmul(&self.components)?;
        out.add_row_broadcast(&self.mean)?;
        Ok(out)
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// Cumulative explained-variance ratio of the kept components.
    pub fn cumulative_evr(&self) -> Vec<f64> {
        cumulative(&self.explained_variance, self.total_variance)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (k, d) = self.components.shape();
        let mut out = Vec::with_capacity(14 + 8 * (d + k * d + k + 1));
        out.extend_from_slice(PCA_MAGIC);
        out.extend_from_slice(&PCA_VERSION.to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        let floats = self
            .mean
            .iter()
            .chain(self.components.as_slice())
            .chain(&self.explained_variance)
            .chain(std::iter::once(&self.total_variance));
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != PCA_MAGIC {
            return Err(Error::Format("not a PCAM model file".into()));
        }
        let version = r.u16()?;
        if version != PCA_VERSION {
            return Err(Error::Format(format!("unsupported PCA model version {version}")));
        }
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        let mean = r.f64s(d)?;
        let components = DenseMatrix::from_vec(k, d, r.f64s(k * d)?)?;
        let explained_variance = r.f64s(k)?;
        let total_variance = r.f64s(1)?[0];
        if r.pos != bytes.len() {
            return Err(Error::Corruption("trailing bytes after PCA model".into()));
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
