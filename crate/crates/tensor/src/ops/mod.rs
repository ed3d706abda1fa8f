pub(crate) mod activation;
mod conv;
mod elementwise;
mod matmul;
pub(crate) mod norm;
mod rotary;
mod shape;


use crate::{Real, Tensor};

/// Gradient slot for parent `i`, computed only when that parent needs it.
#[inline]
pub(crate) fn want<T: Real>(
    parents: &[Tensor<T>],
    i: usize,
    f: impl FnOnce() -> Vec<T>,
) -> Option<Vec<T>> {
    parents[i].requires_grad().then(f)
}

/// Splits `shape` around `axis` into (outer, dim, inner) extents.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
