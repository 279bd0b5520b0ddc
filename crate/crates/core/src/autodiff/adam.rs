//! Adam with bias correction over a flat parameter vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("adam: length mismatch (params {params}, grads {grads}, state {state})")]
pub struct AdamLengthError {
    pub params: usize,
    pub grads: usize,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments with the usual defaults (β₁=0.9, β₂=0.999, ε=1e-8).
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), AdamLengthError> {
        if params.len() != grads.len() || params.len() != self.m.len() || self.m.len() != self.v.len() {
            return Err(AdamLengthError {
                params: params.len(),
                grads: grads.len(),
                state: self.m.len(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut st = AdamState::new(3, 1e-3);
        let mut p = vec![0.5, -1.0, 2.0];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let mut st = AdamState::new(1, 1e-3);
        let mut p = vec![0.0];
        st.step(&mut p, &[1.0]).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = −lr / (1 + ε)
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
        assert!((p[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let run = || {
            let mut st = AdamState::new(2, 1e-3);
            let mut p = vec![0.1, 0.2];
            for k in 0..10 {
                let g = [(k as f64).sin(), (k as f64).cos()];
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn length_mismatch_errors() {
        let mut st = AdamState::new(2, 1e-3);
        let mut p = vec![0.0; 2];
        assert!(st.step(&mut p, &[1.0]).is_err());
        assert_eq!(st.t, 0);
    }
}
