use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, RngState};

/// Number of Balanced EMNIST classes.
pub const NUM_CLASSES: usize = 47;

/// What the feature values represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureScale {
    /// Pixel intensities 0..=255 as read from IDX files.
    RawBytes,
    /// Pixel intensities divided by 255.
    Unit,
    /// Anything else, e.g. PCA projections.
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub name: String,
    pub scale: FeatureScale,
}

/// One mini-batch borrowed from a [`Dataset`].
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub features: DenseMatrix,
    pub labels: &'a [usize],
}

impl Dataset {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, name: impl Into<String>, scale: FeatureScale) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::Label {
                label,
                classes: NUM_CLASSES,
            });
        }
        let in_range = |lo: f64, hi: f64| features.as_slice().iter().all(|&v| v >= lo && v <= hi);
        match scale {
            FeatureScale::RawBytes if !in_range(0.0, 255.0) => {
                return Err(Error::Data("raw pixel values must lie in 0..=255".into()))
            }
            FeatureScale::Unit if !in_range(0.0, 1.0) => {
                return Err(Error::Data("normalised pixel values must lie in [0, 1]".into()))
            }
            FeatureScale::Projected if !features.all_finite() => {
                return Err(Error::Data("features contain non-finite values".into()))
            }
            _ => {}
        }
        Ok(Dataset {
            features,
            labels,
            name: name.into(),
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            name: name.into(),
            scale: self.scale,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows of every part in order. Parts must agree on width and scale.
    pub fn concat(parts: &[&Dataset], name: impl Into<String>) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyInput("concat"))?;
        let d = first.dim();
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum::<usize>() * d);
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != d {
                return Err(Error::shape("concat", first.features.shape(), p.features.shape()));
            }
            if p.scale != first.scale {
                return Err(Error::Consistency(format!(
                    "cannot join {:?} data with {:?} data",
                    first.scale, p.scale
                )));
            }
            data.extend_from_slice(p.features.as_slice());
            labels.extend_from_slice(&p.labels);
        }
        Ok(Dataset {
            features: DenseMatrix::from_vec(labels.len(), d, data)?,
            labels,
            name: name.into(),
            scale: first.scale,
        })
    }

    /// Divides raw pixel bytes by 255. Rejects data that is not raw bytes, so
    /// normalising twice is an error.
    pub fn normalize(self) -> Result<Dataset> {
        if self.scale != FeatureScale::RawBytes {
            return Err(Error::state(format!(
                "dataset '{}' is not raw pixel data ({:?}); refusing to normalise",
                self.name, self.scale
            )));
        }
        Ok(Dataset {
            features: self.features.map(|v| v / 255.0),
            scale: FeatureScale::Unit,
            ..self
        })
    }

    /// Same rows under a seeded Fisher-Yates permutation.
    pub fn shuffle(&self, seed: u64) -> Dataset {
        let perm = permutation(self.len(), seed);
        self.subset(&perm, self.name.clone())
    }

    /// Consecutive mini-batches; the last one may be short.
    pub fn batches(&self, batch_size: usize) -> impl Iterator<Item = Batch<'_>> {
        assert!(batch_size >= 1, "batch size must be at least 1");
        let n = self.len();
        (0..n).step_by(batch_size).map(move |start| {
            let end = (start + batch_size).min(n);
            Batch {
                features: self.features.slice_rows(start, end),
                labels: &self.labels[start..end],
            }
        })
    }
}

/// Seeded Fisher-Yates permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    RngState::new(seed).shuffle(&mut idx);
    idx
}
