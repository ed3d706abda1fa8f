//! Adam with bias correction, and global-norm gradient clipping.

use crate::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment buffers, one per parameter in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

pub struct Adam<T: Real> {
    params: Vec<Tensor<T>>,
    state: AdamState,
}

impl<T: Real> Adam<T> {
    pub fn new(params: Vec<Tensor<T>>, config: AdamConfig) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        Self {
            params,
            state: AdamState {
                m,
                v,
                step_count: 0,
                lr: config.lr,
                beta1: config.beta1,
                beta2: config.beta2,
                eps: config.eps,
            },
        }
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn lr(&self) -> f64 {
        self.state.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.state.lr = lr;
    }

    pub fn zero_grad(&self) {
        self.params.iter().for_each(Tensor::zero_grad);
    }

    /// One update from the gradients currently stored on the parameters.
    /// A parameter without a gradient is treated as having a zero gradient.
    pub fn step(&mut self) {
        let s = &mut self.state;
        s.step_count += 1;
        let t = s.step_count as i32;
        let bc1 = 1.0 - s.beta1.powi(t);
        let bc2 = 1.0 - s.beta2.powi(t);
        for (i, p) in self.params.iter().enumerate() {
            let grad = p.grad();
            let (m, v) = (&mut s.m[i], &mut s.v[i]);
            p.update_data(|data| {
                for (k, x) in data.iter_mut().enumerate() {
                    let g = grad.as_ref().map_or(0.0, |g| g[k].widen());
                    m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g;
                    v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g * g;
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    *x = T::cast(x.widen() - s.lr * m_hat / (v_hat.sqrt() + s.eps));
                }
            });
        }
    }
}

/// Global ℓ₂ norm over every stored gradient.
pub fn global_grad_norm<T: Real>(params: &[Tensor<T>]) -> f64 {
    params
        .iter()
        .filter_map(Tensor::grad)
        .flat_map(|g| g.into_iter().map(|x| x.widen() * x.widen()))
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their global ℓ₂ norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(params: &[Tensor<T>], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = global_grad_norm(params);
    if norm > max_norm {
        let scale = T::cast(max_norm / norm);
        for p in params {
            p.update_grad(|g| g.iter_mut().for_each(|x| *x *= scale));
        }
    }
    norm
}
