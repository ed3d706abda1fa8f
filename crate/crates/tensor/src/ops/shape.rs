use super::{split_axis, want};
use crate::{Real, Result, Tensor, TensorError};

impl<T: Real> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.numel() || shape.contains(&0) {
            return Err(TensorError::DimensionMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(
            "reshape",
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|g, _, _| vec![Some(g.to_vec())]),
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Self> {
        let nd = self.ndim();
        if nd < 2 {
            return Err(TensorError::InvalidArgument {
                op: "transpose",
                msg: format!("needs at least 2 axes, got {:?}", self.shape()),
            });
        }
        let (r, c) = (self.shape()[nd - 2], self.shape()[nd - 1]);
        let batch = self.numel() / (r * c);
        let out = transpose_block(&self.data(), batch, r, c);
        let mut shape = self.shape().to_vec();
        shape.swap(nd - 2, nd - 1);
        Ok(Tensor::from_op(
            "transpose",
            out,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(transpose_block(g, batch, c, r))]),
        ))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        if axis >= self.ndim() || len == 0 || start + len > self.shape()[axis] {
            return Err(TensorError::InvalidArgument {
                op: "narrow",
                msg: format!(
                    "range {start}..{} on axis {axis} of {:?}",
                    start + len,
                    self.shape()
                ),
            });
        }
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        {
            let d = self.data();
            for o in 0..outer {
                let base = (o * dim + start) * inner;
                out.extend_from_slice(&d[base..base + len * inner]);
            }
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Ok(Tensor::from_op(
            "narrow",
            out,
            shape,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let mut gx = vec![T::zero(); outer * dim * inner];
                for o in 0..outer {
                    let base = (o * dim + start) * inner;
                    gx[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Self> {
        let first = parts.first().ok_or_else(|| TensorError::InvalidArgument {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        if axis >= first.ndim() {
            return Err(TensorError::InvalidArgument {
                op: "concat",
                msg: format!("axis {axis} out of range for {:?}", first.shape()),
            });
        }
        for p in parts {
            let compatible = p.ndim() == first.ndim()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(TensorError::DimensionMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let dims: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = dims.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        {
            let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
            for o in 0..outer {
                for (d, &n) in datas.iter().zip(&dims) {
                    out.extend_from_slice(&d[o * n * inner..(o + 1) * n * inner]);
                }
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        Ok(Tensor::from_op(
            "concat",
            out,
            shape,
            parts.to_vec(),
            Box::new(move |g, _, par| {
                let mut offset = 0;
                let mut grads = Vec::with_capacity(dims.len());
                for (i, &n) in dims.iter().enumerate() {
                    grads.push(want(par, i, || {
                        let mut gi = Vec::with_capacity(outer * n * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            gi.extend_from_slice(&g[base..base + n * inner]);
                        }
                        gi
                    }));
                    offset += n;
                }
                grads
            }),
        ))
    }

    /// Appends `extra` zero slices at the end of `axis`.
    pub fn pad_end(&self, axis: usize, extra: usize) -> Result<Self> {
        if extra == 0 {
            return Ok(self.clone());
        }
        let mut zshape = self.shape().to_vec();
        if axis >= zshape.len() {
            return Err(TensorError::InvalidArgument {
                op: "pad_end",
                msg: format!("axis {axis} out of range for {:?}", self.shape()),
            });
        }
        zshape[axis] = extra;
        Tensor::concat(&[self.clone(), Tensor::zeros(&zshape)], axis)
    }
}

fn transpose_block<T: Real>(d: &[T], batch: usize, r: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); d.len()];
    for b in 0..batch {
        let src = &d[b * r * c..(b + 1) * r * c];
        let dst = &mut out[b * r * c..(b + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    out
}
