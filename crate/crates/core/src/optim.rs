//! SGD with momentum, coupled weight decay, and a milestone learning-rate
//! schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grads, MlpState};

/// Optimizer settings. The defaults are the training protocol used by every
/// experiment in this crate: momentum 0.9, weight decay 5e-4, learning rate
/// 0.1 cut by 10x at epochs 100 and 250.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            milestones: vec![100, 250],
            gamma: 0.1,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "milestones must be strictly increasing".to_string(),
            ));
        }
        Ok(())
    }
}

/// Learning rate at an epoch: `lr0 · gamma^(number of milestones <= epoch)`.
pub fn lr_at(epoch: usize, config: &OptimConfig) -> f64 {
    let passed = config.milestones.iter().filter(|&&m| m <= epoch).count();
    config.lr0 * config.gamma.powi(passed as i32)
}

/// One SGD update:
/// `v ← momentum·v + grad + weight_decay·param; param ← param − lr·v`.
///
/// Weight decay is the classic coupled form and applies to weights and
/// biases uniformly. Non-finite gradients abort with a divergence error
/// before touching the state; `epoch` only labels that error.
pub fn sgd_step(
    state: &mut MlpState,
    grads: &Grads,
    lr: f64,
    config: &OptimConfig,
    epoch: usize,
) -> Result<()> {
    if grads.weights.len() != state.weights.len() || grads.biases.len() != state.biases.len() {
        return Err(Error::Shape("sgd_step: gradient layer count mismatch".to_string()));
    }
    if !grads.is_finite() {
        return Err(Error::Diverged { epoch, detail: "non-finite gradient".to_string() });
    }
    for l in 0..state.weights.len() {
        if grads.weights[l].rows() != state.weights[l].rows()
            || grads.weights[l].cols() != state.weights[l].cols()
            || grads.biases[l].len() != state.biases[l].len()
        {
            return Err(Error::Shape(format!("sgd_step: shape mismatch at layer {l}")));
        }
        let (w, vw) = (state.weights[l].data_mut(), state.vel_weights[l].data_mut());
        for ((p, v), &g) in w.iter_mut().zip(vw.iter_mut()).zip(grads.weights[l].data()) {
            *v = config.momentum * *v + g + config.weight_decay * *p;
            *p -= lr * *v;
        }
        let (b, vb) = (&mut state.biases[l], &mut state.vel_biases[l]);
        for ((p, v), &g) in b.iter_mut().zip(vb.iter_mut()).zip(&grads.biases[l]) {
            *v = config.momentum * *v + g + config.weight_decay * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}
