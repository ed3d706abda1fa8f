//! Seeded parameter initialisation.

use rand::Rng;

use crate::{Real, Tensor};

/// Uniform samples in `[−bound, bound)`, drawn in `f64` and rounded to `T`.
pub fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if bound > 0.0 { T::cast(rng.gen_range(-bound..bound)) } else { T::zero() })
        .collect();
    Tensor::new(data, shape).expect("non-empty shape")
}

/// `uniform(±1/√fan_in)`, the default for linear and convolution weights.
pub fn fan_in_uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<T> {
    uniform(rng, shape, 1.0 / (fan_in as f64).sqrt())
}
