use super::{split_axis, want};
use crate::{Real, Result, Tensor, TensorError};

impl<T: Real> Tensor<T> {
    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(TensorError::DimensionMismatch {
                op,
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            })
        }
    }

    fn axis_vec(&self, v: &Self, axis: usize, op: &'static str) -> Result<()> {
        if axis >= self.ndim() || v.ndim() != 1 || v.numel() != self.shape()[axis] {
            return Err(TensorError::DimensionMismatch {
                op,
                lhs: self.shape().to_vec(),
                rhs: v.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| *a + *b).collect();
        Ok(Tensor::from_op(
            "add",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|g, _, p| vec![want(p, 0, || g.to_vec()), want(p, 1, || g.to_vec())]),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| *a - *b).collect();
        Ok(Tensor::from_op(
            "sub",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|g, _, p| {
                vec![
                    want(p, 0, || g.to_vec()),
                    want(p, 1, || g.iter().map(|x| -*x).collect()),
                ]
            }),
        ))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "mul")?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| *a * *b).collect();
        Ok(Tensor::from_op(
            "mul",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|g, _, p| {
                vec![
                    want(p, 0, || mul_slices(g, &p[1].data())),
                    want(p, 1, || mul_slices(g, &p[0].data())),
                ]
            }),
        ))
    }

    pub fn scale(&self, c: f64) -> Self {
        let c = T::cast(c);
        let data = self.data().iter().map(|x| *x * c).collect();
        Tensor::from_op(
            "scale",
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(g.iter().map(|x| *x * c).collect())]),
        )
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        let c = T::cast(c);
        let data = self.data().iter().map(|x| *x + c).collect();
        Tensor::from_op(
            "add_scalar",
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(|g, _, _| vec![Some(g.to_vec())]),
        )
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Self {
        let n = self.numel();
        let total: T = self.data().iter().copied().sum();
        Tensor::from_op(
            "sum",
            vec![total],
            vec![1],
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Self {
        self.sum().scale(1.0 / self.numel() as f64)
    }

    /// Adds a vector along `axis` (bias for that axis).
    pub fn add_along(&self, v: &Self, axis: usize) -> Result<Self> {
        self.axis_vec(v, axis, "add_along")?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let mut data = self.to_vec();
        {
            let vd = v.data();
            for o in 0..outer {
                for (j, &b) in vd.iter().enumerate() {
                    let base = (o * dim + j) * inner;
                    data[base..base + inner].iter_mut().for_each(|x| *x += b);
                }
            }
        }
        Ok(Tensor::from_op(
            "add_along",
            data,
            self.shape().to_vec(),
            vec![self.clone(), v.clone()],
            Box::new(move |g, _, p| {
                vec![
                    want(p, 0, || g.to_vec()),
                    want(p, 1, || {
                        let mut gv = vec![T::zero(); dim];
                        for o in 0..outer {
                            for (j, acc) in gv.iter_mut().enumerate() {
                                let base = (o * dim + j) * inner;
                                *acc += g[base..base + inner].iter().copied().sum::<T>();
                            }
                        }
                        gv
                    }),
                ]
            }),
        ))
    }

    /// Multiplies by a vector along `axis` (per-channel gain).
    pub fn mul_along(&self, v: &Self, axis: usize) -> Result<Self> {
        self.axis_vec(v, axis, "mul_along")?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let mut data = self.to_vec();
        {
            let vd = v.data();
            for o in 0..outer {
                for (j, &s) in vd.iter().enumerate() {
                    let base = (o * dim + j) * inner;
                    data[base..base + inner].iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        Ok(Tensor::from_op(
            "mul_along",
            data,
            self.shape().to_vec(),
            vec![self.clone(), v.clone()],
            Box::new(move |g, _, p| {
                let gx = want(p, 0, || {
                    let vd = p[1].data();
                    let mut gx = g.to_vec();
                    for o in 0..outer {
                        for (j, &s) in vd.iter().enumerate() {
                            let base = (o * dim + j) * inner;
                            gx[base..base + inner].iter_mut().for_each(|x| *x *= s);
                        }
                    }
                    gx
                });
                let gv = want(p, 1, || {
                    let xd = p[0].data();
                    let mut gv = vec![T::zero(); dim];
                    for o in 0..outer {
                        for (j, acc) in gv.iter_mut().enumerate() {
                            let base = (o * dim + j) * inner;
                            for k in base..base + inner {
                                *acc += g[k] * xd[k];
                            }
                        }
                    }
                    gv
                });
                vec![gx, gv]
            }),
        ))
    }
}

pub(crate) fn mul_slices<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x * *y).collect()
}
