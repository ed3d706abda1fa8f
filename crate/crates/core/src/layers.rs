//! Shared building blocks over time-major `S×D` sequences.

use mf2_tensor::{Real, Tensor};

use crate::params::ParamBuilder;
use crate::Result;

/// Position-wise affine map (a 1×1 convolution over time), `S×in → S×out`.
#[derive(Debug, Clone)]
pub struct Linear<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: pb.weight("weight", &[d_in, d_out], d_in),
            bias: pb.zeros("bias", &[d_out]),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.matmul(&self.weight)?.add_along(&self.bias, 1)?)
    }

    pub fn param_count(d_in: usize, d_out: usize) -> usize {
        d_in * d_out + d_out
    }
}

/// Normalisation over the embedding axis of each time step.
#[derive(Debug, Clone)]
pub struct LayerNorm<T: Real> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, dim: usize) -> Self {
        Self { gamma: pb.ones("gamma", &[dim]), beta: pb.zeros("beta", &[dim]) }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.layer_norm(&self.gamma, &self.beta)?)
    }

    pub fn param_count(dim: usize) -> usize {
        2 * dim
    }
}

/// PReLU with one slope per channel, initialised to 0.25.
#[derive(Debug, Clone)]
pub struct PRelu<T: Real> {
    pub alpha: Tensor<T>,
}

impl<T: Real> PRelu<T> {
    pub fn new(pb: &mut ParamBuilder<'_, T>, channels: usize) -> Self {
        Self { alpha: pb.full("alpha", &[channels], 0.25) }
    }

    pub fn forward(&self, x: &Tensor<T>, channel_axis: usize) -> Result<Tensor<T>> {
        Ok(x.prelu(&self.alpha, channel_axis)?)
    }
}

/// `S×D` to the `D×1×S` image layout used by the grouped 2-D convolutions.
pub(crate) fn to_image<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (s, d) = (x.shape()[0], x.shape()[1]);
    Ok(x.transpose()?.reshape(&[d, 1, s])?)
}

/// Inverse of [`to_image`].
pub(crate) fn from_image<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (d, s) = (x.shape()[0], x.shape()[2]);
    Ok(x.reshape(&[d, s])?.transpose()?)
}
