//! Adam with bias correction and an additive L2 weight-decay term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Param;

/// Optimizer state: per-parameter moment buffers plus hyperparameters.
///
/// Weight decay enters as a classic L2 gradient term (`g + wd * theta`),
/// not decoupled decay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    /// Step counter; increases by exactly 1 per `step`.
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        weight_decay: f64,
        params: &[Param],
    ) -> Self {
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            weight_decay,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    /// Experiment defaults: lr 0.01, betas (0.5, 0.999), weight decay 5e-4.
    pub fn with_defaults(params: &[Param]) -> Self {
        AdamState::new(0.01, 0.5, 0.999, 1e-8, 5e-4, params)
    }

    /// One Adam update over all parameters; gradients are zeroed afterward.
    pub fn step(&mut self, params: &mut [Param]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::invalid(
                "adam_step",
                format!("state built for {} params, got {}", self.m.len(), params.len()),
            ));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (idx, p) in params.iter_mut().enumerate() {
            if p.grad.len() != self.m[idx].len() {
                return Err(Error::invalid(
                    "adam_step",
                    format!("param '{}' shape changed under the optimizer", p.name),
                ));
            }
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            for i in 0..p.values.len() {
                let g = p.grad[i] + self.weight_decay * p.values[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.values[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

/// Scales all gradients so their global L2 norm does not exceed `cap`.
pub fn clip_grad_norm(params: &mut [Param], cap: f64) -> f64 {
    let norm: f64 = params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > cap && norm > 0.0 {
        let scale = cap / norm;
        for p in params.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_zero_decay_is_identity() {
        let mut params = vec![Param::new("w", vec![2], vec![0.3, -0.7])];
        let mut adam = AdamState::new(0.01, 0.5, 0.999, 1e-8, 0.0, &params);
        for _ in 0..3 {
            adam.step(&mut params).unwrap();
        }
        assert_eq!(params[0].values, vec![0.3, -0.7]);
    }

    #[test]
    fn single_step_matches_hand_rolled_oracle() {
        // Hand-rolled one-step Adam: g=1, t=1, lr=0.01, betas (0.5, 0.999).
        // m = 0.5, v = 0.001, m_hat = 1, v_hat = 1,
        // delta = 0.01 * 1 / (1 + 1e-8).
        let expected = 1.0 - 0.01 * 1.0 / (1.0 + 1e-8);
        let mut params = vec![Param::new("w", vec![1], vec![1.0])];
        params[0].grad[0] = 1.0;
        let mut adam = AdamState::new(0.01, 0.5, 0.999, 1e-8, 0.0, &params);
        adam.step(&mut params).unwrap();
        assert!((params[0].values[0] - expected).abs() < 1e-12);
        assert_eq!(params[0].grad[0], 0.0, "grads must be zeroed after step");
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn constant_gradient_moves_monotonically_against_sign() {
        let mut params = vec![Param::new("w", vec![1], vec![0.0])];
        let mut adam = AdamState::new(0.01, 0.5, 0.999, 1e-8, 0.0, &params);
        let mut prev = 0.0;
        for _ in 0..2 {
            params[0].grad[0] = 1.0;
            adam.step(&mut params).unwrap();
            assert!(params[0].values[0] < prev);
            prev = params[0].values[0];
        }
    }

    #[test]
    fn weight_decay_shrinks_parameters_without_task_gradient() {
        let mut params = vec![Param::new("w", vec![1], vec![2.0])];
        let mut adam = AdamState::new(0.01, 0.5, 0.999, 1e-8, 5e-4, &params);
        adam.step(&mut params).unwrap();
        assert!(params[0].values[0] < 2.0);
    }

    #[test]
    fn clip_rescales_only_above_cap() {
        let mut params = vec![Param::new("w", vec![2], vec![0.0, 0.0])];
        params[0].grad = vec![3.0, 4.0];
        let norm = clip_grad_norm(&mut params, 10.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert_eq!(params[0].grad, vec![3.0, 4.0]);
        let _ = clip_grad_norm(&mut params, 1.0);
        let clipped: f64 = params[0].grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!((clipped - 1.0).abs() < 1e-12);
    }
}
