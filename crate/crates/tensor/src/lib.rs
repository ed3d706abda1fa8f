//! A small dense-tensor engine with tape-free reverse-mode automatic
//! differentiation.
//!
//! Every [`Tensor`] is a reference-counted node. Operations record their
//! parents and a backward closure when at least one parent requires a
//! gradient; [`Tensor::backward`] walks the resulting graph in reverse
//! topological order and accumulates gradients into every node that
//! requires one.
//!
//! The engine is generic over the scalar type. Models run in `f32`; the
//! [`gradcheck`] harness re-evaluates the same graphs in `f64`.
//!
//! ```
//! use mf2_tensor::Tensor;
//!
//! let x = Tensor::<f64>::new(vec![3.0], &[1]).unwrap().with_grad();
//! let loss = x.mul(&x).unwrap().sum();
//! loss.backward().unwrap();
//! assert_eq!(x.grad().unwrap(), vec![6.0]);
//! ```

mod error;
pub mod gradcheck;
pub mod init;
mod ops;
pub mod optim;
mod scalar;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::norm::{NormKind, NORM_EPS};
pub use ops::activation::Activation;
pub use optim::{clip_global_norm, Adam, AdamConfig, AdamState};
pub use scalar::Real;
pub use tensor::{is_grad_enabled, no_grad, BackwardFn, Tensor};
