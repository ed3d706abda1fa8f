use super::{split_axis, want};
use crate::{Real, Result, Tensor, TensorError};

/// Parameter-free nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Silu,
    Sigmoid,
    /// Over the last axis.
    Softmax,
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    (T::one() + (-x).exp()).recip()
}

impl<T: Real> Tensor<T> {
    pub fn activate(&self, kind: Activation) -> Self {
        match kind {
            Activation::Relu => self.relu(),
            Activation::Silu => self.silu(),
            Activation::Sigmoid => self.sigmoid(),
            Activation::Softmax => self.softmax(),
        }
    }

    /// Applies `f` elementwise; `df(x, y)` is the derivative given input and output.
    fn unary(
        &self,
        name: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        let out = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            name,
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g, y, p| {
                let x = p[0].data();
                vec![Some(g.iter().zip(x.iter().zip(y)).map(|(&gv, (&xv, &yv))| gv * df(xv, yv)).collect())]
            }),
        )
    }

    pub fn relu(&self) -> Self {
        self.unary(
            "relu",
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Self {
        self.unary("sigmoid", sigmoid, |_, y| y * (T::one() - y))
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&self) -> Self {
        self.unary(
            "silu",
            |x| x * sigmoid(x),
            |x, _| {
                let s = sigmoid(x);
                s * (T::one() + x * (T::one() - s))
            },
        )
    }

    /// Parametric ReLU with one learnable slope per index of `axis`.
    pub fn prelu(&self, alpha: &Self, axis: usize) -> Result<Self> {
        if axis >= self.ndim() || alpha.shape() != [self.shape()[axis]] {
            return Err(TensorError::DimensionMismatch {
                op: "prelu",
                lhs: self.shape().to_vec(),
                rhs: alpha.shape().to_vec(),
            });
        }
        let (_, dim, inner) = split_axis(self.shape(), axis);
        let channel = move |k: usize| (k / inner) % dim;
        let out = {
            let (xd, ad) = (self.data(), alpha.data());
            xd.iter()
                .enumerate()
                .map(|(k, &x)| if x > T::zero() { x } else { ad[channel(k)] * x })
                .collect()
        };
        Ok(Tensor::from_op(
            "prelu",
            out,
            self.shape().to_vec(),
            vec![self.clone(), alpha.clone()],
            Box::new(move |g, _, p| {
                let xd = p[0].data();
                let gx = want(p, 0, || {
                    let ad = p[1].data();
                    g.iter()
                        .zip(xd.iter())
                        .enumerate()
                        .map(|(k, (&gv, &x))| if x > T::zero() { gv } else { gv * ad[channel(k)] })
                        .collect()
                });
                let ga = want(p, 1, || {
                    let mut ga = vec![T::zero(); dim];
                    for (k, (&gv, &x)) in g.iter().zip(xd.iter()).enumerate() {
                        if x <= T::zero() {
                            ga[channel(k)] += gv * x;
                        }
                    }
                    ga
                });
                vec![gx, ga]
            }),
        ))
    }

    /// Softmax over the last axis. Entries equal to `-inf` receive zero weight.
    pub fn softmax(&self) -> Self {
        let n = *self.shape().last().unwrap();
        let mut out = self.to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Tensor::from_op(
            "softmax",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g, y, _| {
                let mut gx = vec![T::zero(); g.len()];
                for ((gr, yr), xr) in g.chunks(n).zip(y.chunks(n)).zip(gx.chunks_mut(n)) {
                    let dot: T = gr.iter().zip(yr).map(|(a, b)| *a * *b).sum();
                    for ((o, &gv), &yv) in xr.iter_mut().zip(gr).zip(yr) {
                        *o = yv * (gv - dot);
                    }
                }
                vec![Some(gx)]
            }),
        )
    }
}
