use std::borrow::BorrowMut;

use super::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moments and step counter for a fixed, ordered list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    /// Per-parameter switch for weight decay.
    pub decay: Vec<bool>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> AdamState {
        AdamState {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
            decay: vec![true; params.len()],
        }
    }

    /// One update; `params` may be owned tensors or mutable references.
    pub fn step<P: BorrowMut<Tensor>>(&mut self, params: &mut [P], grads: &[Tensor]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(TensorError::ShapeMismatch {
                expected: vec![self.m.len()],
                found: vec![params.len(), grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            let p: &Tensor = (*p).borrow();
            for other in [g.shape(), m.shape()] {
                if p.shape() != other {
                    return Err(TensorError::ShapeMismatch {
                        expected: p.shape().to_vec(),
                        found: other.to_vec(),
                    });
                }
            }
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powf(self.t as f64);
        let bc2 = 1.0 - c.beta2.powf(self.t as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let p: &mut Tensor = p.borrow_mut();
            let wd = if self.decay[k] { c.weight_decay } else { 0.0 };
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (i, (w, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let gi = gi + wd * *w;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<P: BorrowMut<Tensor>>(
    state: &mut AdamState,
    params: &mut [P],
    grads: &[Tensor],
) -> Result<(), TensorError> {
    state.step(params, grads)
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}
