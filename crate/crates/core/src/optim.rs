//! Mini-batch SGD and Adam over flat parameter buffers.
//!
//! Parameters and gradients are passed as parallel lists of slices (see
//! [`crate::nn::Network::params_mut`] and [`crate::nn::Gradients::as_slices`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(SgdConfig { learning_rate })
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("learning rate must be positive, got {lr}")))
    }
}

fn check_shapes(params: &[&mut [f64]], grads: &[&[f64]]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape("optimizer_step", (params.len(), 0), (grads.len(), 0)));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::shape("optimizer_step", (1, p.len()), (1, g.len())));
        }
    }
    Ok(())
}

/// `theta <- theta - lr * g`
pub fn sgd_step(params: &mut [&mut [f64]], grads: &[&[f64]], cfg: &SgdConfig) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.iter_mut().zip(g.iter()) {
            *pv -= cfg.learning_rate * gv;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    /// `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(learning_rate: f64) -> Result<Self> {
        check_lr(learning_rate)?;
        Ok(AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }
}

/// Adam moments for one training run. Moment buffers are allocated lazily on
/// the first step to match the parameter list they are used with.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_shapes(params, grads)?;
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::state("Adam state was initialised for differently shaped parameters"));
        }
        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::param(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Optimizer selected by an experiment configuration.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(SgdConfig),
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Sgd => Optimizer::Sgd(SgdConfig::new(learning_rate)?),
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(AdamConfig::new(learning_rate)?)),
        })
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        match self {
            Optimizer::Sgd(cfg) => sgd_step(params, grads, cfg),
            Optimizer::Adam(state) => state.step(params, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_zero_grad_is_noop() {
        let mut p = vec![1.0, -2.0];
        sgd_step(&mut [&mut p[..]], &[&[0.0, 0.0]], &SgdConfig::new(0.5).unwrap()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn sgd_scalar() {
        let mut p = vec![1.0];
        sgd_step(&mut [&mut p[..]], &[&[2.0]], &SgdConfig::new(0.1).unwrap()).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0, 2.0];
        assert!(matches!(
            sgd_step(&mut [&mut p[..]], &[&[1.0]], &SgdConfig::new(0.1).unwrap()),
            Err(Error::Shape { .. })
        ));
        let mut adam = AdamState::new(AdamConfig::new(0.1).unwrap());
        assert!(adam.step(&mut [&mut p[..]], &[&[1.0]]).is_err());
    }

    #[test]
    fn bad_learning_rate() {
        assert!(SgdConfig::new(0.0).is_err());
        assert!(AdamConfig::new(-1.0).is_err());
    }

    #[test]
    fn adam_zero_grad_first_step() {
        let mut p = vec![0.3, -0.7];
        let mut adam = AdamState::new(AdamConfig::new(0.1).unwrap());
        adam.step(&mut [&mut p[..]], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![0.3, -0.7]);
        assert_eq!(adam.timestep(), 1);
    }

    #[test]
    fn adam_single_step_closed_form() {
        // after one step m_hat = g and v_hat = g^2, so the update is lr*g/(|g|+eps)
        for g in [1e-6, 0.3, -4.0, 1e5] {
            let mut p = vec![1.0];
            let mut adam = AdamState::new(AdamConfig::new(0.01).unwrap());
            adam.step(&mut [&mut p[..]], &[&[g]]).unwrap();
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15, "g={g}");
        }
    }

    #[test]
    fn adam_moments_track_timestep() {
        let mut p = vec![0.0; 3];
        let mut adam = AdamState::new(AdamConfig::new(0.1).unwrap());
        for _ in 0..5 {
            adam.step(&mut [&mut p[..]], &[&[1.0, -2.0, 0.5]]).unwrap();
        }
        assert_eq!(adam.timestep(), 5);
        assert_eq!(adam.second_moments()[0].len(), 3);
        assert!(adam.second_moments()[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn adam_step_bounded_on_random_gradients() {
        // |update| <= lr (1 - beta1) / sqrt(1 - beta2) whenever 1 - beta1 > sqrt(1 - beta2)
        let bound = 0.01 * 0.1 / 0.001f64.sqrt();
        let mut rng = crate::linalg::RngState::new(4);
        for scale in [1e-6, 1e-2, 1.0, 1e3, 1e6] {
            let mut p = vec![0.0; 50];
            let mut adam = AdamState::new(AdamConfig::new(0.01).unwrap());
            for _ in 0..300 {
                let g: Vec<f64> = (0..50).map(|_| scale * rng.uniform(-1.0, 1.0)).collect();
                let before = p.clone();
                adam.step(&mut [&mut p[..]], &[&g]).unwrap();
                let largest = p.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(largest <= bound * (1.0 + 1e-9), "scale {scale}: step {largest}");
            }
        }
    }

    #[test]
    fn adam_step_can_exceed_lr_after_quiet_stretch() {
        // a spike after many zero gradients moves m faster than sqrt(v)
        let mut p = vec![0.0];
        let mut adam = AdamState::new(AdamConfig::new(0.01).unwrap());
        for _ in 0..1000 {
            adam.step(&mut [&mut p[..]], &[&[0.0]]).unwrap();
        }
        adam.step(&mut [&mut p[..]], &[&[1.0]]).unwrap();
        let ratio = -p[0] / 0.01;
        let c2 = 1.0 - 0.999f64.powi(1001);
        let expected = (0.1 / (1.0 - 0.9f64.powi(1001))) / (0.001f64 / c2).sqrt();
        assert!((ratio - expected).abs() < 1e-6, "{ratio} vs {expected}");
        assert!(ratio > 2.5 && ratio <= 0.1 / 0.001f64.sqrt());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert_eq!("sgd".parse::<OptimizerKind>().unwrap(), OptimizerKind::Sgd);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
