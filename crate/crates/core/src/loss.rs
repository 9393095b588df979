//! Softmax cross-entropy and L1/L2 weight penalties.
//!
//! Penalties cover affine weights only (biases are never penalized) and are
//! added at full strength to every mini-batch loss:
//!
//! * L1: `lambda * sum |w|`, gradient `lambda * sign(w)` with `sign(0) = 0`
//! * L2: `lambda * sum w^2`, gradient `2 * lambda * w`

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Row-wise softmax with per-row max subtraction.
pub fn softmax(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy of `softmax(logits)` against integer labels, and its
/// gradient `(softmax - onehot) / N` with respect to the logits.
pub fn cross_entropy_softmax(logits: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    let n = logits.rows();
    if n == 0 {
        return Err(Error::EmptyInput("cross_entropy_softmax"));
    }
    if labels.len() != n {
        return Err(Error::shape("cross_entropy_softmax", logits.shape(), (labels.len(), 1)));
    }
    let classes = logits.cols();
    let mut grad = DenseMatrix::zeros(n, classes);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Label { label, classes });
        }
        let z = logits.row(r);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln() + max;
        total += log_sum - z[label];
        let g = grad.row_mut(r);
        for (gi, &zi) in g.iter_mut().zip(z) {
            *gi = (zi - log_sum).exp() * inv_n;
        }
        g[label] -= inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Mean cross-entropy without the gradient.
pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    cross_entropy_softmax(logits, labels).map(|(l, _)| l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyKind {
    #[default]
    None,
    L1,
    L2,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::None => "none",
            PenaltyKind::L1 => "l1",
            PenaltyKind::L2 => "l2",
        })
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(PenaltyKind::None),
            "l1" => Ok(PenaltyKind::L1),
            "l2" => Ok(PenaltyKind::L2),
            other => Err(Error::param(format!("unknown penalty kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn l1(lambda: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::L1,
            lambda,
        }
    }

    pub fn l2(lambda: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::L2,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda >= 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::param(format!("penalty lambda must be finite and >= 0, got {}", self.lambda)))
        }
    }

    /// True when the penalty contributes nothing.
    pub fn is_inactive(&self) -> bool {
        self.kind == PenaltyKind::None || self.lambda == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub data_loss: f64,
    pub penalty_loss: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(data_loss: f64, penalty_loss: f64) -> Self {
        LossReport {
            data_loss,
            penalty_loss,
            total: data_loss + penalty_loss,
        }
    }
}

pub fn penalty_value(weights: &[&DenseMatrix], cfg: &PenaltyConfig) -> f64 {
    if cfg.is_inactive() {
        return 0.0;
    }
    let sum: f64 = weights
        .iter()
        .map(|w| match cfg.kind {
            PenaltyKind::L1 => w.as_slice().iter().map(|v| v.abs()).sum::<f64>(),
            PenaltyKind::L2 => w.as_slice().iter().map(|v| v * v).sum::<f64>(),
            PenaltyKind::None => 0.0,
        })
        .sum();
    cfg.lambda * sum
}

#[inline]
fn penalty_derivative(w: f64, cfg: &PenaltyConfig) -> f64 {
    match cfg.kind {
        PenaltyKind::L1 => {
            if w > 0.0 {
                cfg.lambda
            } else if w < 0.0 {
                -cfg.lambda
            } else {
                0.0
            }
        }
        PenaltyKind::L2 => 2.0 * cfg.lambda * w,
        PenaltyKind::None => 0.0,
    }
}

/// Penalty gradient for each weight matrix.
pub fn penalty_grad(weights: &[&DenseMatrix], cfg: &PenaltyConfig) -> Vec<DenseMatrix> {
    weights
        .iter()
        .map(|w| w.map(|v| penalty_derivative(v, cfg)))
        .collect()
}

/// Adds the penalty gradient into existing weight gradients.
pub fn add_penalty_grad(weights: &[&DenseMatrix], grads: &mut [DenseMatrix], cfg: &PenaltyConfig) -> Result<()> {
    if weights.len() != grads.len() {
        return Err(Error::param(format!(
            "{} weight matrices but {} gradients",
            weights.len(),
            grads.len()
        )));
    }
    if cfg.is_inactive() {
        return Ok(());
    }
    for (w, g) in weights.iter().zip(grads.iter_mut()) {
        if w.shape() != g.shape() {
            return Err(Error::shape("add_penalty_grad", w.shape(), g.shape()));
        }
        for (gv, &wv) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *gv += penalty_derivative(wv, cfg);
        }
    }
    Ok(())
}
