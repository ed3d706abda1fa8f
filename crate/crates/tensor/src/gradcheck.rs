//! Central finite-difference gradient checking in `f64`.
//!
//! The numeric side only ever calls the forward closure, so it is
//! independent of every backward rule it checks.

use crate::{no_grad, Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Perturbation `h` for `(f(x + h) − f(x − h)) / 2h`.
    pub step: f64,
    /// Entries probed per input tensor, evenly strided. `usize::MAX` probes all.
    pub max_per_tensor: usize,
    /// Denominator floor of the relative error, so near-zero gradients are
    /// compared absolutely.
    pub floor: f64,
    /// When set, each entry is also differenced at `step / 2`; if the two
    /// estimates differ by more than this relative amount the stencil spans a
    /// kink, and the entry is counted in `skipped` instead of compared.
    pub kink_screen: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-4, max_per_tensor: usize::MAX, floor: 1e-4, kink_screen: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradMismatch {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradMismatch>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn probe_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|i| i * n / max).collect()
    }
}

/// Compares the analytic gradient of the scalar `f()` with respect to each of
/// `inputs` against central differences.
///
/// `f` must read the same tensors it is given (typically by capturing them);
/// entries are perturbed in place and restored afterwards.
pub fn check_gradients<F, E>(
    inputs: &[Tensor<f64>],
    f: F,
    opts: GradCheckOptions,
) -> std::result::Result<GradCheckReport, E>
where
    F: Fn() -> std::result::Result<Tensor<f64>, E>,
    E: From<TensorError>,
{
    inputs.iter().for_each(Tensor::zero_grad);
    f()?.backward()?;
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();
    inputs.iter().for_each(Tensor::zero_grad);

    let eval = || -> std::result::Result<f64, E> { no_grad(|| f().map(|t| t.item())) };
    let mut report = GradCheckReport { checked: 0, skipped: 0, max_rel_error: 0.0, worst: None };
    for (ti, t) in inputs.iter().enumerate() {
        for idx in probe_indices(t.numel(), opts.max_per_tensor) {
            let x0 = t.data()[idx];
            let central = |h: f64| -> std::result::Result<f64, E> {
                t.update_data(|d| d[idx] = x0 + h);
                let fp = eval()?;
                t.update_data(|d| d[idx] = x0 - h);
                let fm = eval()?;
                t.update_data(|d| d[idx] = x0);
                Ok((fp - fm) / (2.0 * h))
            };
            let numeric = central(opts.step)?;
            if let Some(tol) = opts.kink_screen {
                if rel_error(numeric, central(opts.step / 2.0)?, opts.floor) > tol {
                    report.skipped += 1;
                    continue;
                }
            }
            let a = analytic[ti][idx];
            let err = rel_error(a, numeric, opts.floor);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some(GradMismatch { tensor: ti, index: idx, analytic: a, numeric, rel_error: err });
            }
        }
    }
    Ok(report)
}

/// A fixed pseudo-random projection `Σ out ⊙ r`, turning any tensor into a
/// scalar with a generic (non-constant) upstream gradient.
pub fn project(out: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let weights: Vec<f64> = (0..out.numel())
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    out.mul(&Tensor::new(weights, out.shape())?).map(|t| t.sum())
}
