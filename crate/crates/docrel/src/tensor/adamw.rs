//! AdamW: Adam with decoupled weight decay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ParamSet, TensorError};

#[cfg(test)]
use super::Array;

/// Per-parameter moment estimates plus the shared step counter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
}

pub struct AdamW {
    pub state: OptimizerState,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            state: OptimizerState {
                learning_rate,
                weight_decay,
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
                step: 0,
                first_moment: BTreeMap::new(),
                second_moment: BTreeMap::new(),
            },
        }
    }

    /// One update from the accumulated gradients in `params`.
    ///
    /// The weight-decay term is applied directly to the weights, separate
    /// from the bias-corrected moment update.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<(), TensorError> {
        let s = &mut self.state;
        s.step += 1;
        let bc1 = 1.0 - s.beta1.powi(s.step as i32);
        let bc2 = 1.0 - s.beta2.powi(s.step as i32);
        for (name, value, grad) in params.pairs_mut() {
            let m = s
                .first_moment
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; value.numel()]);
            let v = s
                .second_moment
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; value.numel()]);
            if m.len() != value.numel() {
                return Err(TensorError::Dimension {
                    op: "adamw_step",
                    lhs: vec![m.len()],
                    rhs: value.shape.clone(),
                });
            }
            for i in 0..value.numel() {
                let g = grad.data[i];
                m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
                v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                value.data[i] -= s.learning_rate
                    * (m_hat / (v_hat.sqrt() + s.epsilon) + s.weight_decay * value.data[i]);
            }
        }
        Ok(())
    }
}
