use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Adam,
    RmspropMomentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// RMSProp squared-gradient decay.
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    /// Rescale the gradient when its global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            decay: 0.9,
            momentum: 0.9,
            epsilon: 1e-8,
            clip_norm: Some(100.0),
        }
    }
}

/// Optimizer state over a flat parameter vector. Updates minimise.
///
/// For Adam `first`/`second` are the biased moment estimates. For
/// RMSProp-with-momentum (Graves' centred variant) they hold the running
/// mean gradient and running mean squared gradient, and `velocity` the
/// momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub step: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, num_params: usize) -> Self {
        let velocity = match config.algorithm {
            Algorithm::Adam => Vec::new(),
            Algorithm::RmspropMomentum => vec![0.0; num_params],
        };
        Self {
            config,
            step: 0,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
            velocity,
        }
    }

    pub fn num_params(&self) -> usize {
        self.first.len()
    }

    /// One in-place update of `params` against `grads`.
    ///
    /// Fails without touching any state when a gradient entry is not finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.num_params();
        if params.len() != n || grads.len() != n {
            return Err(Error::shape(
                "optimizer_step",
                n,
                format!("params {} / grads {}", params.len(), grads.len()),
            ));
        }
        if let Some(offset) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                op: "optimizer_step",
                offset,
            });
        }
        let scale = match self.config.clip_norm {
            Some(max) => {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let c = &self.config;
        match c.algorithm {
            Algorithm::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for i in 0..n {
                    let g = grads[i] * scale;
                    self.first[i] = c.beta1 * self.first[i] + (1.0 - c.beta1) * g;
                    self.second[i] = c.beta2 * self.second[i] + (1.0 - c.beta2) * g * g;
                    let m_hat = self.first[i] / bc1;
                    let v_hat = self.second[i] / bc2;
                    params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                }
            }
            Algorithm::RmspropMomentum => {
                for i in 0..n {
                    let g = grads[i] * scale;
                    self.first[i] = c.decay * self.first[i] + (1.0 - c.decay) * g;
                    self.second[i] = c.decay * self.second[i] + (1.0 - c.decay) * g * g;
                    let var = (self.second[i] - self.first[i] * self.first[i]).max(0.0);
                    self.velocity[i] = c.momentum * self.velocity[i] - c.learning_rate * g / (var + c.epsilon).sqrt();
                    params[i] += self.velocity[i];
                }
            }
        }
        Ok(())
    }
}
