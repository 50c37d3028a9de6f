use serde::{Deserialize, Serialize};

use super::{loss_gradient, poly_lr, AdamState, ForwardPass, Network, Objective};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub initial_lr: f64,
    pub lr_schedule_power: f64,
    pub data_loss_weight: f64,
    pub physics_loss_weight: f64,
    pub stage1_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            initial_lr: 1e-3,
            lr_schedule_power: 1.0,
            data_loss_weight: 1.0,
            physics_loss_weight: 1.0,
            stage1_iterations: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial_lr must be positive, got {}", self.initial_lr)));
        }
        if !(self.lr_schedule_power > 0.0) {
            return Err(Error::Config("lr_schedule_power must be positive".into()));
        }
        if !(self.data_loss_weight >= 0.0 && self.physics_loss_weight >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.stage1_iterations > self.iterations {
            return Err(Error::Config(format!(
                "stage1_iterations {} exceeds iterations {}",
                self.stage1_iterations, self.iterations
            )));
        }
        Ok(())
    }
}

/// Unweighted loss components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub data: f64,
    pub physics: f64,
}

/// An objective made of a data term and a physics term.
pub trait CompositeObjective: Objective {
    fn parts(&self, pass: &ForwardPass, extras: &[f64]) -> LossParts;
}

/// One full-batch Adam stage with a polynomial learning-rate schedule.
/// Returns the total loss seen at every iteration (before its update).
#[allow(clippy::too_many_arguments)]
pub fn train_stage<O: CompositeObjective>(
    net: &mut Network,
    adam: &mut AdamState,
    times: &[f64],
    objective: &O,
    iterations: usize,
    initial_lr: f64,
    power: f64,
    stage: &'static str,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let lr = poly_lr(it, iterations, initial_lr, power)?;
        let eval = match loss_gradient(net, times, objective) {
            Ok(eval) => eval,
            Err(Error::Training { .. }) => {
                let pass = net.forward_batch(times)?;
                let parts = objective.parts(&pass, &net.extra_values());
                return Err(Error::Training {
                    stage,
                    iteration: it,
                    data_loss: parts.data,
                    physics_loss: parts.physics,
                });
            }
            Err(e) => return Err(e),
        };
        history.push(eval.loss);
        adam.step_network(net, &eval.gradient, lr)?;
    }
    Ok(history)
}
