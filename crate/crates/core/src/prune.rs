//! Training-set reduction: keep the samples of each class that sit closest
//! to their class mean, or that a PCA model reconstructs best.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::pca::PcaModel;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeans {
    /// `num_classes x d`
    pub means: DenseMatrix,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMethod {
    MeanDistance,
    ReconstructionRmse,
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneMethod::MeanDistance => "mean-distance",
            PruneMethod::ReconstructionRmse => "reconstruction-rmse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub method: PruneMethod,
    pub keep_k: usize,
    /// Kept row indices in ascending (original) order.
    pub kept: Vec<usize>,
    /// Kept row indices per class, ascending.
    pub kept_per_class: Vec<Vec<usize>>,
    /// Score of every input row.
    pub scores: Vec<f64>,
    /// Label of every input row.
    pub labels: Vec<usize>,
}

fn check_labels(x: &DenseMatrix, y: &[usize]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Consistency(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

fn accumulate_means(x: &DenseMatrix, y: &[usize], num_classes: usize) -> Result<ClassMeans> {
    check_labels(x, y)?;
    let d = x.cols();
    let mut sums = DenseMatrix::zeros(num_classes, d);
    let mut counts = vec![0usize; num_classes];
    for (row, &label) in x.row_iter().zip(y) {
        if label >= num_classes {
            return Err(Error::Label {
                label,
                classes: num_classes,
            });
        }
        counts[label] += 1;
        for (s, v) in sums.row_mut(label).iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    Ok(ClassMeans { means: sums, counts })
}

/// Per-class arithmetic means. Every class in `0..num_classes` must occur.
pub fn class_means(x: &DenseMatrix, y: &[usize], num_classes: usize) -> Result<ClassMeans> {
    let means = accumulate_means(x, y, num_classes)?;
    if let Some(c) = means.counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no samples")));
    }
    Ok(means)
}

/// Euclidean distance of every row to the mean of its own class.
pub fn mean_distances(x: &DenseMatrix, y: &[usize], means: &ClassMeans) -> Result<Vec<f64>> {
    check_labels(x, y)?;
    if x.cols() != means.means.cols() {
        return Err(Error::shape("mean_distances", x.shape(), means.means.shape()));
    }
    Ok(x
        .row_iter()
        .zip(y)
        .map(|(row, &label)| {
            row.iter()
                .zip(means.means.row(label))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Root-mean-square difference between every row and its PCA reconstruction.
pub fn reconstruction_rmse(x: &DenseMatrix, model: &PcaModel) -> Result<Vec<f64>> {
    if x.cols() != model.dim() {
        return Err(Error::shape("reconstruction_rmse", x.shape(), (x.rows(), model.dim())));
    }
    let d = x.cols() as f64;
    let mut out = Vec::with_capacity(x.rows());
    for start in (0..x.rows()).step_by(CHUNK) {
        let block = x.slice_rows(start, (start + CHUNK).min(x.rows()));
        let recon = model.inverse_transform(&model.transform(&block)?)?;
        for (a, b) in block.row_iter().zip(recon.row_iter()) {
            let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            out.push((sq / d).sqrt());
        }
    }
    Ok(out)
}

/// Keeps, per class, the `keep_k` rows with the smallest score. Ties go to
/// the lower index.
pub fn select_per_class(scores: &[f64], y: &[usize], keep_k: usize, method: PruneMethod) -> Result<PruneReport> {
    if keep_k == 0 {
        return Err(Error::param("keep count per class must be at least 1"));
    }
    if scores.len() != y.len() {
        return Err(Error::Consistency(format!(
            "{} scores but {} labels",
            scores.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("pruning scores contain NaN".into()));
    }
    let num_classes = y.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in y.iter().enumerate() {
        members[l].push(i);
    }
    let kept_per_class: Vec<Vec<usize>> = members
        .into_iter()
        .map(|mut idx| {
            // stable sort keeps ascending index order among equal scores
            idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            idx.truncate(keep_k);
            idx.sort_unstable();
            idx
        })
        .collect();
    let mut kept: Vec<usize> = kept_per_class.iter().flatten().copied().collect();
    kept.sort_unstable();
    Ok(PruneReport {
        method,
        keep_k,
        kept,
        kept_per_class,
        scores: scores.to_vec(),
        labels: y.to_vec(),
    })
}

pub fn prune_by_mean_distance(x: &DenseMatrix, y: &[usize], keep_k: usize) -> Result<PruneReport> {
    let num_classes = y.iter().max().map_or(0, |&m| m + 1);
    let means = accumulate_means(x, y, num_classes)?;
    let scores = mean_distances(x, y, &means)?;
    select_per_class(&scores, y, keep_k, PruneMethod::MeanDistance)
}

pub fn prune_by_reconstruction_rmse(
    x: &DenseMatrix,
    y: &[usize],
    model: &PcaModel,
    keep_k: usize,
) -> Result<PruneReport> {
    check_labels(x, y)?;
    let scores = reconstruction_rmse(x, model)?;
    select_per_class(&scores, y, keep_k, PruneMethod::ReconstructionRmse)
}

/// Per-class keep count needed to land near `total` samples overall.
pub fn keep_k_for_total(total: usize, num_classes: usize) -> usize {
    total / num_classes.max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCurves {
    /// Ascending scores of each class (empty for absent classes).
    pub per_class: Vec<Vec<f64>>,
    /// Mean over non-empty classes at each rank, up to the smallest of them.
    pub average: Vec<f64>,
}

pub fn sorted_score_curve(report: &PruneReport) -> ScoreCurves {
    let num_classes = report.kept_per_class.len();
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    for (&s, &l) in report.scores.iter().zip(&report.labels) {
        per_class[l].push(s);
    }
    for curve in &mut per_class {
        curve.sort_by(f64::total_cmp);
    }
    let present: Vec<&Vec<f64>> = per_class.iter().filter(|c| !c.is_empty()).collect();
    let len = present.iter().map(|c| c.len()).min().unwrap_or(0);
    let average = (0..len)
        .map(|r| present.iter().map(|c| c[r]).sum::<f64>() / present.len() as f64)
        .collect();
    ScoreCurves { per_class, average }
}

impl PruneReport {
    pub fn kept_counts(&self) -> Vec<usize> {
        self.kept_per_class.iter().map(Vec::len).collect()
    }

    /// One line per input row: `class,rank,sample_index,score,kept`, ordered
    /// by class then ascending score.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "class,rank,sample_index,score,kept")?;
        let num_classes = self.kept_per_class.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        for (c, mut idx) in members.into_iter().enumerate() {
            idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
            for (rank, i) in idx.into_iter().enumerate() {
                let kept = self.kept_per_class[c].binary_search(&i).is_ok();
                writeln!(w, "{c},{rank},{i},{},{}", self.scores[i], kept as u8)?;
            }
        }
        Ok(())
    }
}
