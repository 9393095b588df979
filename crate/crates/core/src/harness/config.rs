//! Experiment configuration as flat `key = value` text.
//!
//! ```text
//! architecture   = 784,128,128,128,47
//! activation     = relu
//! dropout_keep   = 0.75,0.75      # one entry per hidden layer, or none
//! penalty        = l1             # none | l1 | l2
//! lambda         = 1e-5
//! optimizer      = adam           # sgd | adam
//! learning_rate  = 0.1
//! epochs         = 100
//! batch_size     = 100
//! seed           = 1
//! pca_components = none           # or a count
//! prune          = none           # none | mean-distance | reconstruction-rmse
//! prune_keep     = 2000
//! prune_chain    = false          # run mean-distance first, keeping chain_keep
//! chain_keep     = 2000
//! patience       = none           # early stopping, or a count of epochs
//! ```

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::loss::{PenaltyConfig, PenaltyKind};
use crate::optim::OptimizerKind;
use crate::prune::PruneMethod;

pub const KEYS: [&str; 16] = [
    "architecture",
    "activation",
    "dropout_keep",
    "penalty",
    "lambda",
    "optimizer",
    "learning_rate",
    "epochs",
    "batch_size",
    "seed",
    "pca_components",
    "prune",
    "prune_keep",
    "prune_chain",
    "chain_keep",
    "patience",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            other => Err(Error::param(format!("unsupported activation '{other}' (only relu)"))),
        }
    }
}

impl FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean-distance" | "mean" => Ok(PruneMethod::MeanDistance),
            "reconstruction-rmse" | "rmse" => Ok(PruneMethod::ReconstructionRmse),
            other => Err(Error::param(format!("unknown prune method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneConfig {
    pub method: PruneMethod,
    pub keep_k: usize,
    /// Run mean-distance pruning (keeping `chain_keep` per class) before
    /// `method`.
    pub chain_after_mean: bool,
    pub chain_keep: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Vec<usize>,
    pub activation: Activation,
    pub dropout_keep: Vec<f64>,
    pub penalty: PenaltyConfig,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub pca_components: Option<usize>,
    pub prune: Option<PruneConfig>,
    pub patience: Option<usize>,
    // kept even when pruning is off so that key order does not matter
    prune_keep: usize,
    prune_chain: bool,
    chain_keep: usize,
}

impl Default for ExperimentConfig {
    /// Three hidden layers of 128, dropout 0.75 on the first two, L1 1e-5,
    /// Adam at 0.1, batches of 100 for 100 epochs.
    fn default() -> Self {
        ExperimentConfig {
            architecture: vec![784, 128, 128, 128, NUM_CLASSES],
            activation: Activation::Relu,
            dropout_keep: vec![0.75, 0.75],
            penalty: PenaltyConfig::l1(1e-5),
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 100,
            seed: 1,
            pca_components: None,
            prune: None,
            patience: None,
            prune_keep: 2000,
            prune_chain: false,
            chain_keep: 2000,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse '{value}'")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "none" | "" => Ok(None),
        v => parse_num(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(format!("{key}: expected true or false, got '{value}'"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value == "none" || value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "architecture" => self.architecture = parse_list(key, value)?,
            "activation" => self.activation = value.parse()?,
            "dropout_keep" => self.dropout_keep = parse_list(key, value)?,
            "penalty" => self.penalty.kind = value.parse::<PenaltyKind>()?,
            "lambda" => self.penalty.lambda = parse_num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "pca_components" => self.pca_components = parse_optional(key, value)?,
            "prune" => {
                self.prune = match value {
                    "none" | "" => None,
                    m => Some(PruneConfig {
                        method: m.parse()?,
                        keep_k: self.prune_keep,
                        chain_after_mean: self.prune_chain,
                        chain_keep: self.chain_keep,
                    }),
                }
            }
            "prune_keep" => self.prune_keep = parse_num(key, value)?,
            "prune_chain" => self.prune_chain = parse_bool(key, value)?,
            "chain_keep" => self.chain_keep = parse_num(key, value)?,
            "patience" => self.patience = parse_optional(key, value)?,
            other => return Err(Error::param(format!("unknown configuration key '{other}'"))),
        }
        if let Some(p) = &mut self.prune {
            p.keep_k = self.prune_keep;
            p.chain_after_mean = self.prune_chain;
            p.chain_keep = self.chain_keep;
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key = value", no + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Textual value of one key, in the form accepted by [`Self::set`].
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "architecture" => join(&self.architecture),
            "activation" => "relu".into(),
            "dropout_keep" => join(&self.dropout_keep),
            "penalty" => self.penalty.kind.to_string(),
            "lambda" => self.penalty.lambda.to_string(),
            "optimizer" => self.optimizer.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "seed" => self.seed.to_string(),
            "pca_components" => self.pca_components.map_or("none".into(), |k| k.to_string()),
            "prune" => self.prune.map_or("none".into(), |p| p.method.to_string()),
            "prune_keep" => self.prune_keep.to_string(),
            "prune_chain" => self.prune_chain.to_string(),
            "chain_keep" => self.chain_keep.to_string(),
            "patience" => self.patience.map_or("none".into(), |k| k.to_string()),
            other => return Err(Error::param(format!("unknown configuration key '{other}'"))),
        })
    }

    /// Every key in canonical order; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn hidden_layers(&self) -> usize {
        self.architecture.len().saturating_sub(2)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.architecture;
        if a.len() < 2 {
            return Err(Error::param("architecture needs at least an input and an output width"));
        }
        if a.contains(&0) {
            return Err(Error::param("architecture widths must be positive"));
        }
        if a[a.len() - 1] != NUM_CLASSES {
            return Err(Error::param(format!(
                "the output width must be {NUM_CLASSES}, got {}",
                a[a.len() - 1]
            )));
        }
        if self.dropout_keep.len() > self.hidden_layers() {
            return Err(Error::param(format!(
                "{} dropout keep probabilities for {} hidden layers",
                self.dropout_keep.len(),
                self.hidden_layers()
            )));
        }
        if let Some(p) = self.dropout_keep.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::param(format!("dropout keep probability {p} outside (0, 1]")));
        }
        self.penalty.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        if self.pca_components == Some(0) {
            return Err(Error::param("pca_components must be at least 1"));
        }
        if let Some(p) = &self.prune {
            if p.keep_k == 0 || (p.chain_after_mean && p.chain_keep == 0) {
                return Err(Error::param("prune keep counts must be at least 1"));
            }
        }
        if self.patience == Some(0) {
            return Err(Error::param("patience must be at least 1 epoch"));
        }
        Ok(())
    }
}
