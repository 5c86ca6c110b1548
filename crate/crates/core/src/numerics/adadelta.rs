//! Adadelta with per-parameter running averages.
//!
//! ```text
//! E[g²]  ← ρ·E[g²] + (1−ρ)·g²
//! Δx     = −√(E[Δx²]+ε) / √(E[g²]+ε) · g
//! E[Δx²] ← ρ·E[Δx²] + (1−ρ)·Δx²
//! x      ← x + η·Δx
//! ```
//!
//! η is a step multiplier, 1 unless a training schedule lowers it; the
//! running average of Δx² is kept unscaled.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub eps: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        AdadeltaConfig { rho: 0.95, eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub config: AdadeltaConfig,
    /// Multiplier η on the applied update.
    pub learning_rate: f64,
    pub sq_grad: Vec<Tensor>,
    pub sq_update: Vec<Tensor>,
}

impl AdadeltaState {
    pub fn new(params: &[Tensor], config: AdadeltaConfig) -> AdadeltaState {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdadeltaState { config, learning_rate: 1.0, sq_grad: zeros(), sq_update: zeros() }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        adadelta_step(params, grads, self)
    }
}

pub fn adadelta_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdadeltaState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.sq_grad.len() {
        return Err(Error::Argument(format!(
            "adadelta: {} parameters, {} gradients, {} accumulators",
            params.len(),
            grads.len(),
            state.sq_grad.len()
        )));
    }
    let AdadeltaConfig { rho, eps } = state.config;
    let lr = state.learning_rate;
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.sq_grad[i].shape() != p.shape() {
            return Err(Error::Shape { op: "adadelta", left: p.shape().to_vec(), right: g.shape().to_vec() });
        }
        let eg = state.sq_grad[i].data_mut();
        let ex = state.sq_update[i].data_mut();
        for (j, (x, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            eg[j] = rho * eg[j] + (1.0 - rho) * gj * gj;
            let dx = -((ex[j] + eps).sqrt() / (eg[j] + eps).sqrt()) * gj;
            ex[j] = rho * ex[j] + (1.0 - rho) * dx * dx;
            *x += lr * dx;
        }
    }
    Ok(())
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let f = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= f);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::row(&[1.0, -2.0])];
        let mut state = AdadeltaState::new(&params, AdadeltaConfig::default());
        state.sq_grad[0] = Tensor::row(&[1.0, 1.0]);
        state.step(&mut params, &[Tensor::zeros(&[1, 2])]).unwrap();
        assert_eq!(params[0].data(), &[1.0, -2.0]);
        assert_eq!(state.sq_grad[0].data(), &[0.95, 0.95]);
    }

    #[test]
    fn shape_mismatch() {
        let mut params = vec![Tensor::row(&[1.0, -2.0])];
        let mut state = AdadeltaState::new(&params, AdadeltaConfig::default());
        let err = state.step(&mut params, &[Tensor::zeros(&[1, 3])]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn learning_rate_scales_step_not_accumulator() {
        let run = |lr: f64| {
            let mut params = vec![Tensor::row(&[1.0])];
            let mut state = AdadeltaState::new(&params, AdadeltaConfig::default());
            state.learning_rate = lr;
            state.step(&mut params, &[Tensor::row(&[2.0])]).unwrap();
            (params[0].data()[0] - 1.0, state.sq_update[0].data()[0])
        };
        let (full, acc_full) = run(1.0);
        let (half, acc_half) = run(0.5);
        assert!((half - 0.5 * full).abs() < 1e-15);
        assert_eq!(acc_full, acc_half);
    }

    #[test]
    fn clipping() {
        let mut g = vec![Tensor::row(&[3.0, 4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
    }
}
