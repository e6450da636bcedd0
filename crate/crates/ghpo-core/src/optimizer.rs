//! AdamW on the ascent gradient.
//!
//! The trainer maximizes the surrogate objective, so the update DESCENDS
//! on the negated gradient: moments track `g = -grad_ascent`, bias
//! correction uses the post-increment step count, and decoupled weight
//! decay (when enabled) shrinks parameters directly rather than through
//! the gradient.

use serde::{Deserialize, Serialize};

/// Moment accumulators and hyperparameters of one AdamW instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Completed updates (bias correction uses step + 1 internally).
    pub step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    /// One update from the ascent gradient at learning rate `lr`.
    pub fn adamw_step(&mut self, params: &mut [f64], grad_ascent: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "param/state shape mismatch");
        assert_eq!(grad_ascent.len(), self.m.len(), "grad/state shape mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = -grad_ascent[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}
