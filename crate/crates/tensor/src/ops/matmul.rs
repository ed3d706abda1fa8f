use super::want;
use crate::{Real, Result, Tensor, TensorError};

/// `c += a · b` for row-major `a: m×k`, `b: k×p`, `c: m×p`.
pub(crate) fn gemm_nn<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for i in 0..m {
        let c_row = &mut c[i * p..(i + 1) * p];
        for (kk, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let b_row = &b[kk * p..(kk + 1) * p];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
}

/// `c += a · bᵀ` for `a: m×k`, `b: p×k`, `c: m×p`.
pub(crate) fn gemm_nt<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..p {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (x, y) in a_row.iter().zip(b_row) {
                acc += *x * *y;
            }
            c[i * p + j] += acc;
        }
    }
}

/// `c += aᵀ · b` for `a: k×m`, `b: k×p`, `c: m×p`.
pub(crate) fn gemm_tn<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for kk in 0..k {
        let b_row = &b[kk * p..(kk + 1) * p];
        for (i, &aki) in a[kk * m..(kk + 1) * m].iter().enumerate() {
            if aki == T::zero() {
                continue;
            }
            let c_row = &mut c[i * p..(i + 1) * p];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aki * bv;
            }
        }
    }
}

impl<T: Real> Tensor<T> {
    /// Matrix product of `M×K` and `K×P`, or the batched product of
    /// `B×M×K` and `B×K×P`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let mismatch = || TensorError::DimensionMismatch {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        let (batch, m, k, p) = match (self.shape(), other.shape()) {
            ([m, k], [k2, p]) if k == k2 => (1, *m, *k, *p),
            ([b, m, k], [b2, k2, p]) if b == b2 && k == k2 => (*b, *m, *k, *p),
            _ => return Err(mismatch()),
        };
        let mut out = vec![T::zero(); batch * m * p];
        {
            let (a, b) = (self.data(), other.data());
            for bi in 0..batch {
                gemm_nn(
                    &a[bi * m * k..(bi + 1) * m * k],
                    &b[bi * k * p..(bi + 1) * k * p],
                    &mut out[bi * m * p..(bi + 1) * m * p],
                    m,
                    k,
                    p,
                );
            }
        }
        let shape = if self.ndim() == 2 { vec![m, p] } else { vec![batch, m, p] };
        Ok(Tensor::from_op(
            "matmul",
            out,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g, _, par| {
                let ga = want(par, 0, || {
                    let b = par[1].data();
                    let mut ga = vec![T::zero(); batch * m * k];
                    for bi in 0..batch {
                        gemm_nt(
                            &g[bi * m * p..(bi + 1) * m * p],
                            &b[bi * k * p..(bi + 1) * k * p],
                            &mut ga[bi * m * k..(bi + 1) * m * k],
                            m,
                            p,
                            k,
                        );
                    }
                    ga
                });
                let gb = want(par, 1, || {
                    let a = par[0].data();
                    let mut gb = vec![T::zero(); batch * k * p];
                    for bi in 0..batch {
                        gemm_tn(
                            &a[bi * m * k..(bi + 1) * m * k],
                            &g[bi * m * p..(bi + 1) * m * p],
                            &mut gb[bi * k * p..(bi + 1) * k * p],
                            k,
                            m,
                            p,
                        );
                    }
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }
}
