use std::path::PathBuf;
use std::time::Instant;

use super::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{argmax, RngState};
use crate::loss::{add_penalty_grad, cross_entropy_softmax, penalty_value};
use crate::nn::{Mode, Network};
use crate::optim::Optimizer;

/// Rows per forward pass during evaluation.
const EVAL_CHUNK: usize = 8192;

const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub valid_loss: f64,
    pub valid_acc: f64,
    /// Wall time of the optimisation pass, excluding evaluation.
    pub epoch_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Stopped by the patience rule after this epoch.
    EarlyStopped { epoch: usize },
    /// The training loss or the parameters became non-finite in this epoch.
    Diverged { epoch: usize },
    /// The configuration could not be run.
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub history: Vec<EpochMetrics>,
    pub status: RunStatus,
    /// Highest validation accuracy over the history (NaN when empty).
    pub best_valid_acc: f64,
    /// 1-based epoch of `best_valid_acc`, 0 when the history is empty.
    pub best_epoch: usize,
    pub test_loss: Option<f64>,
    pub test_acc: Option<f64>,
    pub model_path: Option<PathBuf>,
}

impl RunResult {
    pub fn invalid(config: ExperimentConfig, reason: impl Into<String>) -> Self {
        RunResult {
            config,
            history: Vec::new(),
            status: RunStatus::Invalid(reason.into()),
            best_valid_acc: f64::NAN,
            best_epoch: 0,
            test_loss: None,
            test_acc: None,
            model_path: None,
        }
    }

    fn from_history(config: ExperimentConfig, history: Vec<EpochMetrics>, status: RunStatus) -> Self {
        let mut best_valid_acc = f64::NAN;
        let mut best_epoch = 0;
        for m in &history {
            // first maximum wins
            if best_epoch == 0 || m.valid_acc > best_valid_acc {
                best_valid_acc = m.valid_acc;
                best_epoch = m.epoch;
            }
        }
        RunResult {
            config,
            history,
            status,
            best_valid_acc,
            best_epoch,
            test_loss: None,
            test_acc: None,
            model_path: None,
        }
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    pub fn final_metrics(&self) -> Option<&EpochMetrics> {
        self.history.last()
    }
}

/// Trained network plus its run record.
#[derive(Debug, Clone)]
pub struct Trained {
    pub network: Network,
    pub result: RunResult,
}

/// Mean cross-entropy (no penalty) and accuracy in evaluation mode.
pub fn evaluate(network: &Network, data: &Dataset) -> Result<(f64, f64)> {
    if data.dim() != network.input_width() {
        return Err(Error::shape(
            "evaluate",
            data.features.shape(),
            (data.len(), network.input_width()),
        ));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluate"));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let logits = network.predict(&data.features.slice_rows(start, end))?;
        let labels = &data.labels[start..end];
        let (loss, _) = cross_entropy_softmax(&logits, labels)?;
        loss_sum += loss * (end - start) as f64;
        correct += logits
            .row_iter()
            .zip(labels)
            .filter(|(row, &l)| argmax(row) == l)
            .count();
    }
    let n = data.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Fresh network for `config`, initialised from its seed.
pub fn init_network(config: &ExperimentConfig) -> Result<Network> {
    let mut rng = RngState::with_stream(config.seed, INIT_STREAM);
    Network::mlp(&config.architecture, &config.dropout_keep, &mut rng)
}

/// Runs the configured number of epochs of mini-batch training.
///
/// Each epoch reshuffles the training set with `seed ^ epoch`, takes one
/// optimizer step per batch, then records full-pass metrics on both sets in
/// evaluation mode. A non-finite loss or parameter ends the run with
/// [`RunStatus::Diverged`] instead of an error.
pub fn train(config: &ExperimentConfig, train_set: &Dataset, valid_set: &Dataset) -> Result<Trained> {
    config.validate()?;
    let mut network = init_network(config)?;
    for (set, which) in [(train_set, "train"), (valid_set, "valid")] {
        if set.dim() != network.input_width() {
            return Err(Error::Consistency(format!(
                "{which} set has {} features but the network expects {}",
                set.dim(),
                network.input_width()
            )));
        }
    }
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::EmptyInput("train"));
    }
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate)?;
    let mut dropout_rng = RngState::with_stream(config.seed, DROPOUT_STREAM);
    let mut history = Vec::with_capacity(config.epochs);
    let mut status = RunStatus::Completed;
    let mut best_loss = f64::INFINITY;
    let mut best_network: Option<Network> = None;
    let mut since_best = 0usize;

    for epoch in 1..=config.epochs {
        let shuffled = train_set.shuffle(config.seed ^ epoch as u64);
        let started = Instant::now();
        let mut finite = true;
        for batch in shuffled.batches(config.batch_size) {
            let logits = network.forward(&batch.features, Mode::Train, &mut dropout_rng)?;
            let (data_loss, grad_logits) = cross_entropy_softmax(&logits, batch.labels)?;
            let mut grads = network.backward(&grad_logits)?;
            let weights = network.weights();
            let loss = data_loss + penalty_value(&weights, &config.penalty);
            if !loss.is_finite() {
                finite = false;
                break;
            }
            add_penalty_grad(&weights, &mut grads.weights, &config.penalty)?;
            let grad_slices = grads.as_slices();
            optimizer.step(&mut network.params_mut(), &grad_slices)?;
        }
        let epoch_seconds = started.elapsed().as_secs_f64();
        finite &= network.all_finite();

        let (train_loss, train_acc) = evaluate(&network, train_set)?;
        let (valid_loss, valid_acc) = evaluate(&network, valid_set)?;
        history.push(EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            valid_loss,
            valid_acc,
            epoch_seconds,
        });
        if !finite || !train_loss.is_finite() || !valid_loss.is_finite() {
            status = RunStatus::Diverged { epoch };
            break;
        }
        if let Some(patience) = config.patience {
            if valid_loss < best_loss {
                best_loss = valid_loss;
                best_network = Some(network.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    status = RunStatus::EarlyStopped { epoch };
                    break;
                }
            }
        }
    }
    if let (RunStatus::EarlyStopped { .. }, Some(best)) = (&status, best_network) {
        network = best;
    }
    Ok(Trained {
        network,
        result: RunResult::from_history(config.clone(), history, status),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureScale;
    use crate::linalg::DenseMatrix;
    use crate::nn::{AffineLayer, Layer};

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = RngState::new(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            data.push(centre + rng.uniform(-0.5, 0.5));
            data.push(rng.uniform(-1.0, 1.0));
            labels.push(c);
        }
        Dataset::new(DenseMatrix::from_vec(n, 2, data).unwrap(), labels, "blobs", FeatureScale::Projected).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "architecture = 2,8,47\ndropout_keep = none\npenalty = none\nlambda = 0\noptimizer = adam\nlearning_rate = 0.01\nepochs = 50\nbatch_size = 10",
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_keeps_init() {
        let mut cfg = small_config();
        cfg.epochs = 0;
        let t = train(&cfg, &blobs(20, 1), &blobs(10, 2)).unwrap();
        assert!(t.result.history.is_empty());
        assert_eq!(t.result.status, RunStatus::Completed);
        assert_eq!(t.network.to_bytes(), init_network(&cfg).unwrap().to_bytes());
    }

    #[test]
    fn separable_blobs_fit() {
        let t = train(&small_config(), &blobs(100, 3), &blobs(40, 4)).unwrap();
        let last = t.result.final_metrics().unwrap();
        assert_eq!(last.train_acc, 1.0);
        assert_eq!(t.result.history.len(), 50);
        let max = t.result.history.iter().map(|m| m.valid_acc).fold(f64::MIN, f64::max);
        assert_eq!(t.result.best_valid_acc, max);
    }

    #[test]
    fn uniform_model_evaluation() {
        let layer = AffineLayer::new(DenseMatrix::zeros(2, 47), vec![0.0; 47]).unwrap();
        let net = Network::from_layers(vec![Layer::Affine(layer)]).unwrap();
        let (loss, acc) = evaluate(&net, &blobs(10, 1)).unwrap();
        assert!((loss - 47f64.ln()).abs() < 1e-12);
        // ties resolve to class 0, which is half of the blobs
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn huge_learning_rate_is_flagged() {
        let mut cfg = small_config();
        cfg.optimizer = crate::optim::OptimizerKind::Sgd;
        cfg.learning_rate = 1e300;
        let t = train(&cfg, &blobs(40, 1), &blobs(10, 2)).unwrap();
        assert!(t.result.diverged(), "{:?}", t.result.status);
    }

    #[test]
    fn early_stop_restores_best() {
        let mut cfg = small_config();
        cfg.patience = Some(1);
        cfg.learning_rate = 0.5;
        cfg.epochs = 200;
        let valid = blobs(20, 9);
        let t = train(&cfg, &blobs(60, 5), &valid).unwrap();
        if let RunStatus::EarlyStopped { .. } = t.result.status {
            let best = t.result.history.iter().map(|m| m.valid_loss).fold(f64::INFINITY, f64::min);
            assert_eq!(evaluate(&t.network, &valid).unwrap().0, best);
        } else {
            assert_eq!(t.result.history.len(), 200);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut cfg = small_config();
        cfg.architecture = vec![3, 8, 47];
        assert!(matches!(
            train(&cfg, &blobs(10, 1), &blobs(10, 2)),
            Err(Error::Consistency(_))
        ));
    }
}
