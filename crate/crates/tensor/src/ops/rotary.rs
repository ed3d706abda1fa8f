use crate::{Real, Result, Tensor, TensorError};

impl<T: Real> Tensor<T> {
    /// Rotary phase rotation of an `S×d` tensor (`d` even).
    ///
    /// Feature pair `(2i, 2i+1)` of row `s` is rotated by
    /// `positions[s] · base^(−2i/d)`.
    pub fn rotary(&self, positions: &[usize], base: f64) -> Result<Self> {
        let (s, d) = match self.shape() {
            [s, d] if d % 2 == 0 && *s == positions.len() => (*s, *d),
            _ => {
                return Err(TensorError::InvalidArgument {
                    op: "rotary",
                    msg: format!("shape {:?} with {} positions", self.shape(), positions.len()),
                })
            }
        };
        let half = d / 2;
        let mut cos = vec![T::zero(); s * half];
        let mut sin = vec![T::zero(); s * half];
        for (row, &pos) in positions.iter().enumerate() {
            for i in 0..half {
                let theta = pos as f64 * base.powf(-2.0 * i as f64 / d as f64);
                cos[row * half + i] = T::cast(theta.cos());
                sin[row * half + i] = T::cast(theta.sin());
            }
        }
        let rotate = move |x: &[T], sign: T| -> Vec<T> {
            let mut out = vec![T::zero(); x.len()];
            for row in 0..s {
                for i in 0..half {
                    let (c, sn) = (cos[row * half + i], sign * sin[row * half + i]);
                    let a = x[row * d + 2 * i];
                    let b = x[row * d + 2 * i + 1];
                    out[row * d + 2 * i] = a * c - b * sn;
                    out[row * d + 2 * i + 1] = a * sn + b * c;
                }
            }
            out
        };
        let out = rotate(&self.data(), T::one());
        Ok(Tensor::from_op(
            "rotary",
            out,
            vec![s, d],
            vec![self.clone()],
            Box::new(move |g, _, _| vec![Some(rotate(g, -T::one()))]),
        ))
    }
}
