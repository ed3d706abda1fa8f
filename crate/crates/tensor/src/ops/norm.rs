use super::want;
use crate::{Real, Result, Tensor, TensorError};

/// Variance floor inside the square root.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Over the last axis, affine per last-axis position.
    Layer,
    /// Over all trailing axes of each leading-axis channel, affine per channel.
    Instance,
}

impl<T: Real> Tensor<T> {
    pub fn normalize(&self, kind: NormKind, gamma: &Self, beta: &Self) -> Result<Self> {
        self.normalize_impl(kind, gamma, beta, false)
    }

    /// Same values as [`Tensor::normalize`], but the backward pass treats the
    /// mean and variance as constants. Used to probe the local (sliding
    /// window) part of a Jacobian through a normalisation layer.
    pub fn normalize_frozen_stats(&self, kind: NormKind, gamma: &Self, beta: &Self) -> Result<Self> {
        self.normalize_impl(kind, gamma, beta, true)
    }

    fn normalize_impl(&self, kind: NormKind, gamma: &Self, beta: &Self, frozen: bool) -> Result<Self> {
        let shape = self.shape();
        let (blocks, len) = match kind {
            NormKind::Layer => {
                let n = *shape.last().unwrap();
                (self.numel() / n, n)
            }
            NormKind::Instance => (shape[0], self.numel() / shape[0]),
        };
        let affine = match kind {
            NormKind::Layer => len,
            NormKind::Instance => blocks,
        };
        for p in [gamma, beta] {
            if p.shape() != [affine] {
                return Err(TensorError::DimensionMismatch {
                    op: "normalize",
                    lhs: shape.to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let per_position = kind == NormKind::Layer;
        let eps = T::cast(NORM_EPS);
        let inv_len = T::cast(1.0 / len as f64);
        let mut xhat = vec![T::zero(); self.numel()];
        let mut rstd = vec![T::zero(); blocks];
        let mut out = vec![T::zero(); self.numel()];
        {
            let xd = self.data();
            let (gd, bd) = (gamma.data(), beta.data());
            for b in 0..blocks {
                let xs = &xd[b * len..(b + 1) * len];
                let mean = xs.iter().copied().sum::<T>() * inv_len;
                let var = xs.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() * inv_len;
                let r = (var + eps).sqrt().recip();
                rstd[b] = r;
                for j in 0..len {
                    let k = b * len + j;
                    let a = if per_position { j } else { b };
                    xhat[k] = (xs[j] - mean) * r;
                    out[k] = xhat[k] * gd[a] + bd[a];
                }
            }
        }
        Ok(Tensor::from_op(
            "normalize",
            out,
            shape.to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g, _, p| {
                let gx = want(p, 0, || {
                    let gd = p[1].data();
                    let mut gx = vec![T::zero(); g.len()];
                    let mut gh = vec![T::zero(); len];
                    for b in 0..blocks {
                        let mut mean_gh = T::zero();
                        let mut mean_ghx = T::zero();
                        for j in 0..len {
                            let k = b * len + j;
                            let a = if per_position { j } else { b };
                            gh[j] = g[k] * gd[a];
                            mean_gh += gh[j];
                            mean_ghx += gh[j] * xhat[k];
                        }
                        if frozen {
                            mean_gh = T::zero();
                            mean_ghx = T::zero();
                        }
                        mean_gh *= inv_len;
                        mean_ghx *= inv_len;
                        for j in 0..len {
                            let k = b * len + j;
                            gx[k] = rstd[b] * (gh[j] - mean_gh - xhat[k] * mean_ghx);
                        }
                    }
                    gx
                });
                let index = |k: usize| if per_position { k % len } else { k / len };
                let ggamma = want(p, 1, || {
                    let mut acc = vec![T::zero(); affine];
                    for (k, &gv) in g.iter().enumerate() {
                        acc[index(k)] += gv * xhat[k];
                    }
                    acc
                });
                let gbeta = want(p, 2, || {
                    let mut acc = vec![T::zero(); affine];
                    for (k, &gv) in g.iter().enumerate() {
                        acc[index(k)] += gv;
                    }
                    acc
                });
                vec![gx, ggamma, gbeta]
            }),
        ))
    }

    pub fn layer_norm(&self, gamma: &Self, beta: &Self) -> Result<Self> {
        self.normalize(NormKind::Layer, gamma, beta)
    }

    pub fn instance_norm(&self, gamma: &Self, beta: &Self) -> Result<Self> {
        self.normalize(NormKind::Instance, gamma, beta)
    }
}
