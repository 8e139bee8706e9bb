//! Named parameter registry.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

/// Initialization scheme for a new parameter tensor.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    /// Uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in is inferred from
    /// the tensor shape (all dims but the first).
    FanInUniform,
}

/// Map from hierarchical parameter path to tensor. Names are unique and
/// iteration is lexicographic, so optimizer sweeps and checkpoints are
/// deterministic.
#[derive(Default)]
pub struct ParamRegistry {
    map: BTreeMap<String, Tensor>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        ParamRegistry { map: BTreeMap::new() }
    }

    /// Create, initialize, and register a parameter. The returned handle
    /// shares storage with the registry entry.
    pub fn create(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut Rng) -> Result<Tensor> {
        if self.map.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name: {name}")));
        }
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::FanInUniform => {
                let fan_in: usize = shape[1..].iter().product::<usize>().max(1);
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| rng.uniform(-bound, bound)).collect()
            }
        };
        let t = Tensor::from_vec(shape, data)?.requiring_grad();
        self.map.insert(name.to_string(), t.clone());
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Parameters in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.map.keys().cloned().collect()
    }

    pub fn total_values(&self) -> usize {
        self.map.values().map(|t| t.numel()).sum()
    }

    pub fn zero_grads(&self) {
        for t in self.map.values() {
            t.zero_grad();
        }
    }

    /// Overwrite parameter values by name; shapes must match exactly.
    pub fn load_values(&self, values: &BTreeMap<String, (Vec<usize>, Vec<f64>)>) -> Result<()> {
        for (name, tensor) in &self.map {
            let Some((shape, data)) = values.get(name) else {
                return Err(Error::Checkpoint(format!("missing parameter: {name}")));
            };
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} in checkpoint vs {:?} in model",
                    shape,
                    tensor.shape()
                )));
            }
            tensor.data_mut().copy_from_slice(data);
        }
        Ok(())
    }

    /// Snapshot of every parameter's shape and values.
    pub fn snapshot(&self) -> BTreeMap<String, (Vec<usize>, Vec<f64>)> {
        self.map
            .iter()
            .map(|(k, v)| (k.clone(), (v.shape().to_vec(), v.to_vec())))
            .collect()
    }
}
