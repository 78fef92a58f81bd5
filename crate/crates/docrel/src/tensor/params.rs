//! Named parameter store shared by the model, the optimizer and checkpoints.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Array, TensorError};

/// Ordered map of parameter name to value, with a matching gradient
/// accumulation buffer per parameter.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    values: BTreeMap<String, Array>,
    grads: BTreeMap<String, Array>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Array) {
        self.grads
            .insert(name.to_string(), Array::zeros(value.shape.clone()));
        self.values.insert(name.to_string(), value);
    }

    /// Uniform init in [-scale, scale].
    pub fn insert_uniform(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        self.insert(name, Array { shape, data });
    }

    pub fn get(&self, name: &str) -> Option<&Array> {
        self.values.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.values.get_mut(name)
    }

    pub fn grad(&self, name: &str) -> Option<&Array> {
        self.grads.get(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.values.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.values().map(|a| a.numel()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.values.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.values.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Add per-parameter gradients (e.g. from one document's tape) into the
    /// accumulation buffers.
    pub fn accumulate(&mut self, grads: &[(String, Array)]) -> Result<(), TensorError> {
        for (name, g) in grads {
            let buf = self
                .grads
                .get_mut(name)
                .ok_or_else(|| TensorError::Argument(format!("unknown parameter {name}")))?;
            if buf.shape != g.shape {
                return Err(TensorError::Dimension {
                    op: "accumulate",
                    lhs: buf.shape.clone(),
                    rhs: g.shape.clone(),
                });
            }
            for (b, x) in buf.data.iter_mut().zip(&g.data) {
                *b += x;
            }
        }
        Ok(())
    }

    /// Pairs of (value, grad) in name order, for the optimizer.
    pub(crate) fn pairs_mut(&mut self) -> Vec<(&String, &mut Array, &Array)> {
        let grads = &self.grads;
        self.values
            .iter_mut()
            .map(|(name, value)| {
                let g = grads.get(name).expect("grad buffer exists for every param");
                (name, value, g)
            })
            .collect()
    }
}
