use crate::error::{Error, Result};
use crate::linalg::{Axis, DenseMatrix, Reduce, RngState};

/// Whether a forward pass is part of training (caches, sampled dropout
/// masks) or pure inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer computing `x * W + b`.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    /// `fan_in x fan_out`
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
    cached_input: Option<DenseMatrix>,
}

/// Gradients produced by [`AffineLayer::backward`].
#[derive(Debug, Clone)]
pub struct AffineGrads {
    /// `None` when the caller asked to skip the input gradient.
    pub input: Option<DenseMatrix>,
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
}

impl AffineLayer {
    pub fn new(weights: DenseMatrix, biases: Vec<f64>) -> Result<Self> {
        if biases.len() != weights.cols() {
            return Err(Error::shape(
                "affine_new",
                weights.shape(),
                (1, biases.len()),
            ));
        }
        Ok(AffineLayer {
            weights,
            biases,
            cached_input: None,
        })
    }

    /// Glorot-uniform weights on `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut RngState) -> Result<Self> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = rng.sample_uniform(fan_in, fan_out, -limit, limit)?;
        Self::new(weights, vec![0.0; fan_out])
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn has_cache(&self) -> bool {
        self.cached_input.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }

    /// Inference-only forward; never touches the cache.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.fan_in() {
            return Err(Error::shape("affine_forward", x.shape(), self.weights.shape()));
        }
        let mut out = x.matmul(&self.weights)?;
        out.add_row_broadcast(&self.biases)?;
        Ok(out)
    }

    pub fn forward(&mut self, x: &DenseMatrix, mode: Mode) -> Result<DenseMatrix> {
        let out = self.predict(x)?;
        if mode == Mode::Train {
            self.cached_input = Some(x.clone());
        }
        Ok(out)
    }

    /// Consumes the cached input. `want_input` controls whether
    /// `grad_out * Wᵀ` is computed at all.
    pub fn backward(&mut self, grad_out: &DenseMatrix, want_input: bool) -> Result<AffineGrads> {
        let x = self
            .cached_input
            .take()
            .ok_or_else(|| Error::state("affine backward without a training forward pass"))?;
        if grad_out.cols() != self.fan_out() || grad_out.rows() != x.rows() {
            return Err(Error::shape(
                "affine_backward",
                grad_out.shape(),
                (x.rows(), self.fan_out()),
            ));
        }
        let weights = x.t_matmul(grad_out)?;
        let biases = grad_out.reduce_axis(Axis::Rows, Reduce::Sum)?;
        let input = if want_input {
            Some(grad_out.matmul_t(&self.weights)?)
        } else {
            None
        };
        Ok(AffineGrads {
            input,
            weights,
            biases,
        })
    }
}

/// Rectified linear unit. The derivative at exactly zero is taken as zero.
#[derive(Debug, Clone, Default)]
pub struct ReluLayer {
    cached_input: Option<DenseMatrix>,
}

impl ReluLayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_cache(&self) -> bool {
        self.cached_input.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }

    pub fn predict(&self, x: &DenseMatrix) -> DenseMatrix {
        x.map(|v| v.max(0.0))
    }

    pub fn forward(&mut self, x: &DenseMatrix, mode: Mode) -> DenseMatrix {
        let out = self.predict(x);
        if mode == Mode::Train {
            self.cached_input = Some(x.clone());
        }
        out
    }

    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        let x = self
            .cached_input
            .take()
            .ok_or_else(|| Error::state("relu backward without a training forward pass"))?;
        x.zip_with(grad, |xi, g| if xi > 0.0 { g } else { 0.0 })
    }
}

/// Dropout with a keep probability `p`.
///
/// Training keeps each unit when a uniform draw is `<= p` and zeroes it
/// otherwise, without rescaling. Evaluation multiplies every activation by
/// `p` instead, so expected activations agree between the two modes.
#[derive(Debug, Clone)]
pub struct DropoutLayer {
    keep_prob: f64,
    mode: Mode,
    cached_mask: Option<DenseMatrix>,
}

impl DropoutLayer {
    pub fn new(keep_prob: f64) -> Result<Self> {
        check_keep_prob(keep_prob)?;
        Ok(DropoutLayer {
            keep_prob,
            mode: Mode::Train,
            cached_mask: None,
        })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// The binary keep-mask of the last training forward pass.
    pub fn mask(&self) -> Option<&DenseMatrix> {
        self.cached_mask.as_ref()
    }

    pub fn has_cache(&self) -> bool {
        self.cached_mask.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cached_mask = None;
    }

    pub fn predict(&self, x: &DenseMatrix) -> DenseMatrix {
        let p = self.keep_prob;
        x.map(|v| p * v)
    }

    pub fn forward(&mut self, x: &DenseMatrix, rng: &mut RngState) -> Result<DenseMatrix> {
        check_keep_prob(self.keep_prob)?;
        match self.mode {
            Mode::Eval => Ok(self.predict(x)),
            Mode::Train => {
                let p = self.keep_prob;
                let draws = rng.sample_uniform(x.rows(), x.cols(), 0.0, 1.0)?;
                let mask = draws.map(|u| if u <= p { 1.0 } else { 0.0 });
                let out = x.zip_with(&mask, |v, m| v * m)?;
                self.cached_mask = Some(mask);
                Ok(out)
            }
        }
    }

    pub fn backward(&mut self, grads: &DenseMatrix) -> Result<DenseMatrix> {
        let mask = self
            .cached_mask
            .take()
            .ok_or_else(|| Error::state("dropout backward without a training forward pass"))?;
        mask.zip_with(grads, |m, g| m * g)
    }
}

fn check_keep_prob(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("dropout keep probability must lie in (0, 1], got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn affine_identity_and_bias() {
        let mut layer = AffineLayer::new(DenseMatrix::identity(2), vec![0.0, 0.0]).unwrap();
        let x = m(&[&[1.0, 2.0], &[-3.0, 4.0]]);
        assert_eq!(layer.forward(&x, Mode::Eval).unwrap(), x);
        assert!(!layer.has_cache());

        let mut layer = AffineLayer::new(DenseMatrix::identity(2), vec![10.0, 20.0]).unwrap();
        assert_eq!(layer.forward(&m(&[&[1.0, 2.0]]), Mode::Train).unwrap(), m(&[&[11.0, 22.0]]));
        assert!(layer.has_cache());
    }

    #[test]
    fn affine_zero_grad() {
        let mut rng = RngState::new(1);
        let mut layer = AffineLayer::glorot(3, 2, &mut rng).unwrap();
        let x = rng.sample_uniform(4, 3, -1.0, 1.0).unwrap();
        layer.forward(&x, Mode::Train).unwrap();
        let g = layer.backward(&DenseMatrix::zeros(4, 2), true).unwrap();
        assert!(g.input.unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(g.weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.biases.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_scalar_grad() {
        let mut layer = AffineLayer::new(m(&[&[0.7]]), vec![0.1]).unwrap();
        layer.forward(&m(&[&[3.0]]), Mode::Train).unwrap();
        let g = layer.backward(&m(&[&[-2.0]]), true).unwrap();
        assert_eq!(g.weights.get(0, 0), -6.0);
        assert_eq!(g.biases, vec![-2.0]);
        assert_eq!(g.input.unwrap().get(0, 0), -2.0 * 0.7);
    }

    #[test]
    fn affine_backward_needs_cache() {
        let mut layer = AffineLayer::new(DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
        assert!(matches!(
            layer.backward(&DenseMatrix::zeros(1, 2), true),
            Err(Error::State(_))
        ));
        layer.forward(&DenseMatrix::zeros(1, 2), Mode::Train).unwrap();
        layer.backward(&DenseMatrix::zeros(1, 2), false).unwrap();
        // the cache is consumed by the first backward
        assert!(layer.backward(&DenseMatrix::zeros(1, 2), false).is_err());
    }

    #[test]
    fn affine_shape_mismatch() {
        let mut layer = AffineLayer::new(DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
        assert!(matches!(
            layer.forward(&DenseMatrix::zeros(1, 3), Mode::Train),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn relu_forward_backward() {
        let mut relu = ReluLayer::new();
        let x = m(&[&[-1.0, 0.0, 2.0]]);
        assert_eq!(relu.forward(&x, Mode::Train), m(&[&[0.0, 0.0, 2.0]]));
        assert_eq!(
            relu.backward(&m(&[&[1.0, 1.0, 1.0]])).unwrap(),
            m(&[&[0.0, 0.0, 1.0]])
        );
        assert!(matches!(relu.backward(&x), Err(Error::State(_))));
    }

    #[test]
    fn dropout_eval_scales_by_keep() {
        let mut d = DropoutLayer::new(0.75).unwrap();
        d.set_mode(Mode::Eval);
        let mut rng = RngState::new(0);
        let out = d.forward(&m(&[&[4.0, 8.0]]), &mut rng).unwrap();
        assert_eq!(out, m(&[&[3.0, 6.0]]));
        assert!(d.mask().is_none());
        // no randomness consumed in eval mode
        assert_eq!(rng.next_u64(), RngState::new(0).next_u64());
    }

    #[test]
    fn dropout_keep_one_is_identity() {
        let mut d = DropoutLayer::new(1.0).unwrap();
        let mut rng = RngState::new(5);
        let x = rng.sample_uniform(10, 10, -3.0, 3.0).unwrap();
        assert_eq!(d.forward(&x, &mut rng).unwrap(), x);
    }

    #[test]
    fn dropout_kept_fraction() {
        let mut d = DropoutLayer::new(0.5).unwrap();
        let mut rng = RngState::new(11);
        let x = DenseMatrix::filled(1000, 100, 1.0);
        let out = d.forward(&x, &mut rng).unwrap();
        let kept = out.as_slice().iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&kept), "{kept}");
    }

    #[test]
    fn dropout_backward_uses_mask() {
        let mut d = DropoutLayer::new(0.6).unwrap();
        let mut rng = RngState::new(2);
        let x = rng.sample_uniform(5, 6, 0.5, 1.0).unwrap();
        let grads = rng.sample_uniform(5, 6, -1.0, 1.0).unwrap();
        d.forward(&x, &mut rng).unwrap();
        let mask = d.mask().unwrap().clone();
        assert!(mask.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let back = d.backward(&grads).unwrap();
        assert_eq!(back, mask.zip_with(&grads, |a, b| a * b).unwrap());
        assert!(matches!(d.backward(&grads), Err(Error::State(_))));
    }

    #[test]
    fn dropout_mask_extremes() {
        let mut d = DropoutLayer::new(1.0).unwrap();
        let mut rng = RngState::new(2);
        let grads = rng.sample_uniform(3, 3, -1.0, 1.0).unwrap();
        d.forward(&DenseMatrix::filled(3, 3, 1.0), &mut rng).unwrap();
        assert_eq!(d.backward(&grads).unwrap(), grads);

        // a keep probability this small drops every one of 9 units
        let mut d = DropoutLayer::new(1e-300).unwrap();
        d.forward(&DenseMatrix::filled(3, 3, 1.0), &mut rng).unwrap();
        assert_eq!(d.backward(&grads).unwrap(), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn dropout_rejects_bad_keep() {
        for p in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(DropoutLayer::new(p), Err(Error::Parameter(_))));
        }
    }
}
