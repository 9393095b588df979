use super::layers::{AffineLayer, DropoutLayer, Mode, ReluLayer};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, RngState};

#[derive(Debug, Clone)]
pub enum Layer {
    Affine(AffineLayer),
    Relu(ReluLayer),
    Dropout(DropoutLayer),
}

/// Ordered stack of layers ending in the logits of the output affine layer.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    architecture: Vec<usize>,
}

/// Parameter gradients, one entry per affine layer in forward order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Flat views in the same order as [`Network::params_mut`].
    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.as_slices().iter().all(|s| s.iter().all(|&v| v == 0.0))
    }
}

impl Network {
    /// Builds `affine -> relu [-> dropout]` blocks for every hidden width and a
    /// final affine layer. `dropout_keep[i]` places dropout on the output of
    /// hidden layer `i`; hidden layers past the end of the slice get none.
    pub fn mlp(widths: &[usize], dropout_keep: &[f64], rng: &mut RngState) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::param("an architecture needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::param("layer widths must be positive"));
        }
        let hidden = widths.len() - 2;
        if dropout_keep.len() > hidden {
            return Err(Error::param(format!(
                "{} dropout keep probabilities given for {hidden} hidden layers",
                dropout_keep.len()
            )));
        }
        let mut layers = Vec::new();
        for (i, pair) in widths.windows(2).enumerate() {
            layers.push(Layer::Affine(AffineLayer::glorot(pair[0], pair[1], rng)?));
            if i < hidden {
                layers.push(Layer::Relu(ReluLayer::new()));
                if let Some(&p) = dropout_keep.get(i) {
                    layers.push(Layer::Dropout(DropoutLayer::new(p)?));
                }
            }
        }
        Self::from_layers(layers)
    }

    /// Wraps an explicit layer list, checking that consecutive affine layers
    /// agree on their widths.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let mut architecture = Vec::new();
        for layer in &layers {
            if let Layer::Affine(a) = layer {
                match architecture.last() {
                    None => architecture.push(a.fan_in()),
                    Some(&w) if w != a.fan_in() => {
                        return Err(Error::param(format!(
                            "affine layer expects {} inputs but the previous layer emits {w}",
                            a.fan_in()
                        )))
                    }
                    _ => {}
                }
                architecture.push(a.fan_out());
            }
        }
        if architecture.is_empty() {
            return Err(Error::param("a network needs at least one affine layer"));
        }
        Ok(Network {
            layers,
            architecture,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn architecture(&self) -> &[usize] {
        &self.architecture
    }

    pub fn input_width(&self) -> usize {
        self.architecture[0]
    }

    pub fn output_width(&self) -> usize {
        *self.architecture.last().unwrap()
    }

    pub fn affine_layers(&self) -> impl Iterator<Item = &AffineLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Affine(a) => Some(a),
            _ => None,
        })
    }

    pub fn weights(&self) -> Vec<&DenseMatrix> {
        self.affine_layers().map(|a| &a.weights).collect()
    }

    /// Mutable flat views `[W0, b0, W1, b1, ...]`.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Affine(a) = layer {
                out.push(a.weights.as_mut_slice());
                out.push(a.biases.as_mut_slice());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.affine_layers()
            .map(|a| a.weights.as_slice().len() + a.biases.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.affine_layers()
            .all(|a| a.weights.all_finite() && a.biases.iter().all(|b| b.is_finite()))
    }

    /// Copy of the network with every dropout layer removed.
    pub fn without_dropout(&self) -> Network {
        let layers = self
            .layers
            .iter()
            .filter(|l| !matches!(l, Layer::Dropout(_)))
            .cloned()
            .collect();
        Network {
            layers,
            architecture: self.architecture.clone(),
        }
    }

    pub fn clear_caches(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Affine(a) => a.clear_cache(),
                Layer::Relu(r) => r.clear_cache(),
                Layer::Dropout(d) => d.clear_cache(),
            }
        }
    }

    /// Side-effect free evaluation-mode forward pass.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Affine(a) => a.predict(&h)?,
                Layer::Relu(r) => r.predict(&h),
                Layer::Dropout(d) => d.predict(&h),
            };
        }
        Ok(h)
    }

    /// Forward pass in `mode`. Training mode caches what backward needs and
    /// draws dropout masks from `rng`; evaluation mode is equivalent to
    /// [`Network::predict`].
    pub fn forward(&mut self, x: &DenseMatrix, mode: Mode, rng: &mut RngState) -> Result<DenseMatrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Affine(a) => a.forward(&h, mode)?,
                Layer::Relu(r) => r.forward(&h, mode),
                Layer::Dropout(d) => {
                    d.set_mode(mode);
                    d.forward(&h, rng)?
                }
            };
        }
        Ok(h)
    }

    /// Backpropagates `grad_logits` through the cached training forward pass.
    /// Caches are consumed; the input gradient of the first layer is never
    /// formed.
    pub fn backward(&mut self, grad_logits: &DenseMatrix) -> Result<Gradients> {
        if grad_logits.cols() != self.output_width() {
            return Err(Error::shape(
                "network_backward",
                grad_logits.shape(),
                (grad_logits.rows(), self.output_width()),
            ));
        }
        let first_affine = self
            .layers
            .iter()
            .position(|l| matches!(l, Layer::Affine(_)))
            .expect("validated at construction");
        let n_affine = self.architecture.len() - 1;
        let mut weights = Vec::with_capacity(n_affine);
        let mut biases = Vec::with_capacity(n_affine);
        let mut grad = grad_logits.clone();
        for (idx, layer) in self.layers.iter_mut().enumerate().rev() {
            match layer {
                Layer::Affine(a) => {
                    let g = a.backward(&grad, idx > first_affine)?;
                    weights.push(g.weights);
                    biases.push(g.biases);
                    match g.input {
                        Some(input) => grad = input,
                        None => break,
                    }
                }
                Layer::Relu(r) => grad = r.backward(&grad)?,
                Layer::Dropout(d) => grad = d.backward(&grad)?,
            }
        }
        // anything before the first affine layer is never reached
        self.clear_caches();
        weights.reverse();
        biases.reverse();
        Ok(Gradients { weights, biases })
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::shape(
                "network_forward",
                x.shape(),
                (x.rows(), self.input_width()),
            ));
        }
        Ok(())
    }
}
