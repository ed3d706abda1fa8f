use super::want;
use crate::{Real, Result, Tensor, TensorError};

fn dims_err<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> TensorError {
    TensorError::DimensionMismatch { op, lhs: a.shape().to_vec(), rhs: b.shape().to_vec() }
}

fn check_bias<T: Real>(op: &'static str, bias: Option<&Tensor<T>>, cout: usize, w: &Tensor<T>) -> Result<()> {
    match bias {
        Some(b) if b.shape() != [cout] => Err(dims_err(op, w, b)),
        _ => Ok(()),
    }
}

/// `dst[t] += scale * src[t + offset]` wherever `t + offset` is in range.
#[inline]
fn shifted_axpy<T: Real>(dst: &mut [T], src: &[T], offset: isize, scale: T) {
    let n = dst.len() as isize;
    let lo = (-offset).max(0);
    let hi = (src.len() as isize - offset).min(n);
    if lo >= hi {
        return;
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let s0 = (lo as isize + offset) as usize;
    for (d, s) in dst[lo..hi].iter_mut().zip(&src[s0..s0 + (hi - lo)]) {
        *d += scale * *s;
    }
}

/// `Σ_t a[t] * b[t + offset]` over the overlapping range.
#[inline]
fn shifted_dot<T: Real>(a: &[T], b: &[T], offset: isize) -> T {
    let lo = (-offset).max(0);
    let hi = (b.len() as isize - offset).min(a.len() as isize);
    if lo >= hi {
        return T::zero();
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let s0 = (lo as isize + offset) as usize;
    a[lo..hi].iter().zip(&b[s0..s0 + (hi - lo)]).map(|(x, y)| *x * *y).sum()
}

#[derive(Clone, Copy)]
struct Taps {
    cout: usize,
    opg: usize,
    cpg: usize,
    kh: usize,
    kw: usize,
    dh: isize,
    dw: isize,
    ph: isize,
    pw: isize,
}

impl Taps {
    /// Visits every (out channel, in channel, weight index, row offset, column offset).
    fn each(&self, mut f: impl FnMut(usize, usize, usize, isize, isize)) {
        for o in 0..self.cout {
            let gi = o / self.opg;
            for ci in 0..self.cpg {
                let cin = gi * self.cpg + ci;
                for a in 0..self.kh {
                    for b in 0..self.kw {
                        let widx = ((o * self.cpg + ci) * self.kh + a) * self.kw + b;
                        f(o, cin, widx, a as isize * self.dh - self.ph, b as isize * self.dw - self.pw);
                    }
                }
            }
        }
    }
}

impl<T: Real> Tensor<T> {
    /// 1-D cross-correlation of `Cin×T` input with `Cout×Cin×Kw` weights and
    /// zero padding `pad` on both ends.
    ///
    /// Output length is `floor((T + 2·pad − Kw) / stride) + 1`.
    pub fn conv1d(&self, w: &Self, bias: Option<&Self>, stride: usize, pad: usize) -> Result<Self> {
        let op = "conv1d";
        let (cin, t) = match self.shape() {
            [c, t] => (*c, *t),
            _ => return Err(dims_err(op, self, w)),
        };
        let (cout, kw) = match w.shape() {
            [o, i, k] if *i == cin => (*o, *k),
            _ => return Err(dims_err(op, self, w)),
        };
        check_bias(op, bias, cout, w)?;
        if stride == 0 {
            return Err(TensorError::InvalidArgument { op, msg: "stride must be ≥ 1".into() });
        }
        if t + 2 * pad < kw {
            return Err(TensorError::InputTooShort { op, len: t, kernel: kw, pad });
        }
        let t_out = (t + 2 * pad - kw) / stride + 1;
        let pad_i = pad as isize;
        let mut out = vec![T::zero(); cout * t_out];
        {
            let xd = self.data();
            let wd = w.data();
            for o in 0..cout {
                let row = &mut out[o * t_out..(o + 1) * t_out];
                if let Some(b) = bias {
                    let bv = b.data()[o];
                    row.iter_mut().for_each(|y| *y = bv);
                }
                for i in 0..cin {
                    let xr = &xd[i * t..(i + 1) * t];
                    for k in 0..kw {
                        let wv = wd[(o * cin + i) * kw + k];
                        for (to, y) in row.iter_mut().enumerate() {
                            let src = (to * stride) as isize + k as isize - pad_i;
                            if src >= 0 && (src as usize) < t {
                                *y += wv * xr[src as usize];
                            }
                        }
                    }
                }
            }
        }
        let mut parents = vec![self.clone(), w.clone()];
        parents.extend(bias.cloned());
        Ok(Tensor::from_op(
            op,
            out,
            vec![cout, t_out],
            parents,
            Box::new(move |g, _, p| {
                let gx = want(p, 0, || {
                    let wd = p[1].data();
                    let mut gx = vec![T::zero(); cin * t];
                    for o in 0..cout {
                        let gr = &g[o * t_out..(o + 1) * t_out];
                        for i in 0..cin {
                            for k in 0..kw {
                                let wv = wd[(o * cin + i) * kw + k];
                                for (to, &gv) in gr.iter().enumerate() {
                                    let src = (to * stride) as isize + k as isize - pad_i;
                                    if src >= 0 && (src as usize) < t {
                                        gx[i * t + src as usize] += wv * gv;
                                    }
                                }
                            }
                        }
                    }
                    gx
                });
                let gw = want(p, 1, || {
                    let xd = p[0].data();
                    let mut gw = vec![T::zero(); cout * cin * kw];
                    for o in 0..cout {
                        let gr = &g[o * t_out..(o + 1) * t_out];
                        for i in 0..cin {
                            for k in 0..kw {
                                let mut acc = T::zero();
                                for (to, &gv) in gr.iter().enumerate() {
                                    let src = (to * stride) as isize + k as isize - pad_i;
                                    if src >= 0 && (src as usize) < t {
                                        acc += gv * xd[i * t + src as usize];
                                    }
                                }
                                gw[(o * cin + i) * kw + k] = acc;
                            }
                        }
                    }
                    gw
                });
                let mut grads = vec![gx, gw];
                if p.len() == 3 {
                    grads.push(want(p, 2, || {
                        (0..cout).map(|o| g[o * t_out..(o + 1) * t_out].iter().copied().sum()).collect()
                    }));
                }
                grads
            }),
        ))
    }

    /// Transposed 1-D convolution of `Cin×S` input with `Cin×Cout×Kw` weights.
    ///
    /// Output length is `(S − 1)·stride + Kw`. This is the adjoint of
    /// [`Tensor::conv1d`] with the same weights, stride and no padding.
    pub fn conv_transpose1d(&self, w: &Self, stride: usize) -> Result<Self> {
        let op = "conv_transpose1d";
        let (cin, s) = match self.shape() {
            [c, s] => (*c, *s),
            _ => return Err(dims_err(op, self, w)),
        };
        let (cout, kw) = match w.shape() {
            [i, o, k] if *i == cin => (*o, *k),
            _ => return Err(dims_err(op, self, w)),
        };
        if stride == 0 {
            return Err(TensorError::InvalidArgument { op, msg: "stride must be ≥ 1".into() });
        }
        let t = (s - 1) * stride + kw;
        let mut out = vec![T::zero(); cout * t];
        {
            let xd = self.data();
            let wd = w.data();
            for i in 0..cin {
                let xr = &xd[i * s..(i + 1) * s];
                for o in 0..cout {
                    let wr = &wd[(i * cout + o) * kw..(i * cout + o + 1) * kw];
                    let yr = &mut out[o * t..(o + 1) * t];
                    for (si, &xv) in xr.iter().enumerate() {
                        let base = si * stride;
                        for (k, &wv) in wr.iter().enumerate() {
                            yr[base + k] += xv * wv;
                        }
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            op,
            out,
            vec![cout, t],
            vec![self.clone(), w.clone()],
            Box::new(move |g, _, p| {
                let gx = want(p, 0, || {
                    let wd = p[1].data();
                    let mut gx = vec![T::zero(); cin * s];
                    for i in 0..cin {
                        for o in 0..cout {
                            let wr = &wd[(i * cout + o) * kw..(i * cout + o + 1) * kw];
                            let gr = &g[o * t..(o + 1) * t];
                            for si in 0..s {
                                let base = si * stride;
                                let mut acc = T::zero();
                                for (k, &wv) in wr.iter().enumerate() {
                                    acc += gr[base + k] * wv;
                                }
                                gx[i * s + si] += acc;
                            }
                        }
                    }
                    gx
                });
                let gw = want(p, 1, || {
                    let xd = p[0].data();
                    let mut gw = vec![T::zero(); cin * cout * kw];
                    for i in 0..cin {
                        let xr = &xd[i * s..(i + 1) * s];
                        for o in 0..cout {
                            let gr = &g[o * t..(o + 1) * t];
                            for k in 0..kw {
                                let mut acc = T::zero();
                                for (si, &xv) in xr.iter().enumerate() {
                                    acc += xv * gr[si * stride + k];
                                }
                                gw[(i * cout + o) * kw + k] = acc;
                            }
                        }
                    }
                    gw
                });
                vec![gx, gw]
            }),
        ))
    }

    /// Grouped 2-D cross-correlation over a `C×H×W` input with
    /// `Cout×(C/groups)×kh×kw` weights, dilation `(dh, dw)` and zero padding
    /// that preserves `H×W` (odd kernel extents only).
    pub fn grouped_conv2d(
        &self,
        w: &Self,
        bias: Option<&Self>,
        groups: usize,
        dilation: (usize, usize),
    ) -> Result<Self> {
        let op = "grouped_conv2d";
        let (c, h, wd_) = match self.shape() {
            [c, h, w] => (*c, *h, *w),
            _ => return Err(dims_err(op, self, w)),
        };
        if groups == 0 || c % groups != 0 {
            return Err(TensorError::Grouping { op, channels: c, groups });
        }
        let cpg = c / groups;
        let (cout, kh, kw) = match w.shape() {
            [o, i, a, b] if *i == cpg => (*o, *a, *b),
            _ => return Err(dims_err(op, self, w)),
        };
        if cout % groups != 0 {
            return Err(TensorError::Grouping { op, channels: cout, groups });
        }
        if kh % 2 == 0 || kw % 2 == 0 || dilation.0 == 0 || dilation.1 == 0 {
            return Err(TensorError::InvalidArgument {
                op,
                msg: format!("kernel ({kh},{kw}) must be odd and dilation {dilation:?} ≥ 1"),
            });
        }
        check_bias(op, bias, cout, w)?;
        let width = wd_;
        let opg = cout / groups;
        let (dh, dw) = (dilation.0 as isize, dilation.1 as isize);
        let ph = dh * (kh as isize - 1) / 2;
        let pw = dw * (kw as isize - 1) / 2;
        let plane = h * width;
        let geom = Taps { cout, opg, cpg, kh, kw, dh, dw, ph, pw };
        let mut out = vec![T::zero(); cout * plane];
        {
            if let Some(b) = bias {
                let bd = b.data();
                for o in 0..cout {
                    out[o * plane..(o + 1) * plane].iter_mut().for_each(|y| *y = bd[o]);
                }
            }
            let xd = self.data();
            let wdat = w.data();
            geom.each(|o, cin, widx, dy, dx| {
                let wv = wdat[widx];
                for row in 0..h {
                    let src_row = row as isize + dy;
                    if src_row < 0 || src_row >= h as isize {
                        continue;
                    }
                    let src = &xd[cin * plane + src_row as usize * width..][..width];
                    let dst = &mut out[o * plane + row * width..][..width];
                    shifted_axpy(dst, src, dx, wv);
                }
            });
        }
        let mut parents = vec![self.clone(), w.clone()];
        parents.extend(bias.cloned());
        Ok(Tensor::from_op(
            op,
            out,
            vec![cout, h, width],
            parents,
            Box::new(move |g, _, p| {
                let gx = want(p, 0, || {
                    let wdat = p[1].data();
                    let mut gx = vec![T::zero(); c * plane];
                    geom.each(|o, cin, widx, dy, dx| {
                        let wv = wdat[widx];
                        for row in 0..h {
                            let src_row = row as isize + dy;
                            if src_row < 0 || src_row >= h as isize {
                                continue;
                            }
                            let gsrc = &g[o * plane + row * width..][..width];
                            let dst = &mut gx[cin * plane + src_row as usize * width..][..width];
                            shifted_axpy(dst, gsrc, -dx, wv);
                        }
                    });
                    gx
                });
                let gw = want(p, 1, || {
                    let xd = p[0].data();
                    let mut gw = vec![T::zero(); cout * cpg * kh * kw];
                    geom.each(|o, cin, widx, dy, dx| {
                        let mut acc = T::zero();
                        for row in 0..h {
                            let src_row = row as isize + dy;
                            if src_row < 0 || src_row >= h as isize {
                                continue;
                            }
                            let gr = &g[o * plane + row * width..][..width];
                            let xr = &xd[cin * plane + src_row as usize * width..][..width];
                            acc += shifted_dot(gr, xr, dx);
                        }
                        gw[widx] = acc;
                    });
                    gw
                });
                let mut grads = vec![gx, gw];
                if p.len() == 3 {
                    grads.push(want(p, 2, || {
                        (0..cout).map(|o| g[o * plane..(o + 1) * plane].iter().copied().sum()).collect()
                    }));
                }
                grads
            }),
        ))
    }
}
