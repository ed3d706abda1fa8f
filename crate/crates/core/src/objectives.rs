//! SI-SDR, permutation-invariant training and evaluation records.
//!
//! SI-SDR here is the plain projection form without mean removal:
//!
//! ```text
//! s = (⟨ŝ,r⟩/‖r‖²)·r      n = ŝ − s
//! SI-SDR = 10·log10((‖s‖² + ε) / (‖n‖² + ε)),  ε = 1e-8
//! ```
//!
//! Metrics are accumulated in `f64` regardless of the model precision.

use std::time::{Duration, Instant};

use itertools::Itertools;
use mf2_tensor::{Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::separator::Separator;
use crate::{Error, Result};

pub const EPS: f64 = 1e-8;
/// Largest source count handled by the exhaustive permutation search.
pub const MAX_PIT_SOURCES: usize = 5;

const DB: f64 = 10.0 / std::f64::consts::LN_10;

struct Projection {
    target: Vec<f64>,
    noise: Vec<f64>,
    target_energy: f64,
    noise_energy: f64,
}

fn project<T: Real>(est: &[T], reference: &[T]) -> Result<Projection> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch(est.len(), reference.len()));
    }
    let r: Vec<f64> = reference.iter().map(|v| v.widen()).collect();
    let ref_energy: f64 = r.iter().map(|v| v * v).sum();
    if ref_energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let dot: f64 = est.iter().zip(&r).map(|(e, r)| e.widen() * r).sum();
    let alpha = dot / ref_energy;
    let target: Vec<f64> = r.iter().map(|v| alpha * v).collect();
    let noise: Vec<f64> = est.iter().zip(&target).map(|(e, s)| e.widen() - s).collect();
    let target_energy = target.iter().map(|v| v * v).sum();
    let noise_energy = noise.iter().map(|v| v * v).sum();
    Ok(Projection { target, noise, target_energy, noise_energy })
}

/// SI-SDR in dB.
pub fn si_sdr<T: Real>(est: &[T], reference: &[T]) -> Result<f64> {
    let p = project(est, reference)?;
    Ok(DB * ((p.target_energy + EPS) / (p.noise_energy + EPS)).ln())
}

/// Differentiable SI-SDR of a `[T]` (or `1×T`) estimate, shape `[1]`.
pub fn si_sdr_tensor<T: Real>(est: &Tensor<T>, reference: &[T]) -> Result<Tensor<T>> {
    let p = project(&est.data(), reference)?;
    let value = DB * ((p.target_energy + EPS) / (p.noise_energy + EPS)).ln();
    let (ps, pn) = (p.target_energy + EPS, p.noise_energy + EPS);
    let grad: Vec<f64> = p.target.iter().zip(&p.noise).map(|(s, n)| DB * (2.0 * s / ps - 2.0 * n / pn)).collect();
    Ok(Tensor::from_op(
        "si_sdr",
        vec![T::cast(value)],
        vec![1],
        vec![est.clone()],
        Box::new(move |g, _, _| {
            let g0 = g[0].widen();
            vec![Some(grad.iter().map(|d| T::cast(g0 * d)).collect())]
        }),
    ))
}

fn rows<T: Real>(data: &[T], c: usize) -> Vec<&[T]> {
    data.chunks(data.len() / c).collect()
}

/// Best assignment of estimates to references.
///
/// `perm[i]` is the reference matched to estimate `i`; `mean_si_sdr` is the
/// mean SI-SDR under that assignment. Ties keep the lexicographically first
/// permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub mean_si_sdr: f64,
    /// SI-SDR of each estimate against its matched reference.
    pub per_source: Vec<f64>,
}

/// Exhaustive search over all `C!` permutations of `C = est.len()` sources.
pub fn pit<T: Real>(est: &[&[T]], refs: &[&[T]]) -> Result<Assignment> {
    let c = est.len();
    if c != refs.len() {
        return Err(Error::LengthMismatch(c, refs.len()));
    }
    if !(2..=MAX_PIT_SOURCES).contains(&c) {
        return Err(Error::SourceCount(c));
    }
    let mut table = vec![vec![0.0; c]; c];
    for (i, e) in est.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            table[i][j] = si_sdr(e, r)?;
        }
    }
    let mut best: Option<Assignment> = None;
    for perm in (0..c).permutations(c) {
        let per_source: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| table[i][j]).collect();
        let mean = per_source.iter().sum::<f64>() / c as f64;
        if best.as_ref().is_none_or(|b| mean > b.mean_si_sdr) {
            best = Some(Assignment { perm, mean_si_sdr: mean, per_source });
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// PIT loss `−max_π mean_i SI-SDR(ŝᵢ, s_π(i))` on a `C×T` estimate, with the
/// chosen assignment. Differentiable w.r.t. `est`.
pub fn pit_loss<T: Real>(est: &Tensor<T>, refs: &[Vec<T>]) -> Result<(Tensor<T>, Assignment)> {
    let c = refs.len();
    if est.ndim() != 2 || est.shape()[0] != c {
        return Err(Error::LengthMismatch(est.shape()[0], c));
    }
    let assignment = {
        let data = est.data();
        let ref_rows: Vec<&[T]> = refs.iter().map(Vec::as_slice).collect();
        pit(&rows(&data, c), &ref_rows)?
    };
    let mut total: Option<Tensor<T>> = None;
    for (i, &j) in assignment.perm.iter().enumerate() {
        let term = si_sdr_tensor(&est.narrow(0, i, 1)?, &refs[j])?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    let loss = total.expect("c ≥ 2").scale(-1.0 / c as f64);
    Ok((loss, assignment))
}

/// SI-SDR improvement of the best assignment over the unprocessed mixture.
pub fn si_sdri<T: Real>(est: &[&[T]], refs: &[&[T]], mix: &[T]) -> Result<(f64, Assignment)> {
    let a = pit(est, refs)?;
    let baseline = refs.iter().map(|r| si_sdr(mix, r)).sum::<Result<f64>>()? / refs.len() as f64;
    Ok((a.mean_si_sdr - baseline, a))
}

/// One evaluation record, serialised as a JSON line with fields in this order:
/// `id, si_sdr, permutation, si_sdri, rtf, error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub id: String,
    /// SI-SDR (dB) of each estimate against its matched reference.
    pub si_sdr: Vec<f64>,
    /// `permutation[i]` is the reference index (0-based) matched to estimate `i`.
    pub permutation: Vec<usize>,
    pub si_sdri: f64,
    pub rtf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalReport {
    pub fn failed(id: impl Into<String>, err: &Error) -> Self {
        Self {
            id: id.into(),
            si_sdr: vec![],
            permutation: vec![],
            si_sdri: f64::NAN,
            rtf: f64::NAN,
            error: Some(format!("{}: {err}", err.tag())),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

/// Processing time over audio duration.
pub fn rtf(elapsed: Duration, audio_seconds: f64) -> f64 {
    elapsed.as_secs_f64() / audio_seconds
}

/// Wall-clock separation time of `clips` over their total duration, after one
/// untimed warm-up pass on the first clip.
pub fn measure_rtf(model: &Separator<f32>, clips: &[Vec<f32>], sample_rate: u32) -> Result<f64> {
    let first = clips.first().ok_or_else(|| Error::config("clips", "need at least one clip"))?;
    model.separate_samples(first)?;
    let mut elapsed = Duration::ZERO;
    let mut samples = 0usize;
    for clip in clips {
        let start = Instant::now();
        model.separate_samples(clip)?;
        elapsed += start.elapsed();
        samples += clip.len();
    }
    Ok(rtf(elapsed, samples as f64 / sample_rate as f64))
}
