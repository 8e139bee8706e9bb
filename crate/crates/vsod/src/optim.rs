//! Adam optimizer over a parameter registry.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::params::ParamRegistry;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adaptive moment estimation with bias correction. State is keyed by
/// parameter name; sweeps follow registry order, so updates are
/// deterministic.
pub struct Adam {
    pub cfg: AdamConfig,
    step_count: u64,
    moments: BTreeMap<String, Moments>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Adam {
        Adam { cfg, step_count: 0, moments: BTreeMap::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the gradients currently held by `params`.
    /// Parameters without a gradient are left untouched. A non-finite
    /// gradient rejects the whole step, naming the parameter.
    pub fn step(&mut self, params: &ParamRegistry) -> Result<()> {
        for (name, tensor) in params.iter() {
            if let Some(grad) = tensor.grad() {
                if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
                    return Err(Error::Train(format!(
                        "non-finite gradient ({bad}) for parameter {name}; step rejected"
                    )));
                }
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (name, tensor) in params.iter() {
            let Some(grad) = tensor.grad() else { continue };
            let entry = self.moments.entry(name.clone()).or_insert_with(|| Moments {
                m: vec![0.0; grad.len()],
                v: vec![0.0; grad.len()],
            });
            let mut data = tensor.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                entry.m[i] = c.beta1 * entry.m[i] + (1.0 - c.beta1) * g;
                entry.v[i] = c.beta2 * entry.v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = entry.m[i] / bc1;
                let v_hat = entry.v[i] / bc2;
                data[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
