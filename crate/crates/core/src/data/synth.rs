//! Band-limited synthetic "speakers".
//!
//! Speaker `k` owns the `k`-th of `speakers` equal slices of
//! `[band_low, band_high]` Hz, minus a guard margin on each side. An utterance
//! is a few sines inside that slice, each with a slow amplitude envelope,
//! plus a faint band-pass noise floor, scaled to a fixed RMS.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MixtureSample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub count: usize,
    pub duration_s: f64,
    pub sources: usize,
    /// Distinct speakers available; `0` means `sources`.
    pub speakers: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub band_low: f64,
    pub band_high: f64,
    /// Fraction of each band left empty, split between both edges.
    pub guard: f64,
    pub tones: usize,
    /// Envelope rate range in Hz.
    pub modulation: (f64, f64),
    /// Noise RMS relative to the tonal part.
    pub noise_level: f64,
    pub target_rms: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 4,
            duration_s: 1.0,
            sources: 2,
            speakers: 0,
            seed: 0,
            sample_rate: 8000,
            band_low: 200.0,
            band_high: 3600.0,
            guard: 0.2,
            tones: 3,
            modulation: (2.0, 6.0),
            noise_level: 0.02,
            target_rms: 0.1,
        }
    }
}

impl CorpusSpec {
    pub fn speaker_count(&self) -> usize {
        self.speakers.max(self.sources)
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::config("count", "must be ≥ 1"));
        }
        if !(self.duration_s > 0.0) || self.samples() == 0 {
            return Err(Error::config("duration_s", "must be positive"));
        }
        if self.sources == 0 {
            return Err(Error::config("sources", "must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.guard) {
            return Err(Error::config("guard", "must be in [0, 1)"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 < self.band_low && self.band_low < self.band_high && self.band_high < nyquist) {
            return Err(Error::config("band_high", "need 0 < band_low < band_high < sample_rate/2"));
        }
        Ok(())
    }

    /// Usable frequency range of speaker `k`.
    pub fn band(&self, k: usize) -> (f64, f64) {
        let width = (self.band_high - self.band_low) / self.speaker_count() as f64;
        let lo = self.band_low + k as f64 * width;
        let margin = width * self.guard / 2.0;
        (lo + margin, lo + width - margin)
    }
}

/// RBJ band-pass biquad (0 dB peak).
fn bandpass(x: &[f64], center: f64, q: f64, rate: f64) -> Vec<f64> {
    let w0 = TAU * center / rate;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    x.iter()
        .map(|&x0| {
            let y0 = b0 * x0 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            y0
        })
        .collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// One utterance of speaker `speaker`, `len` samples long.
pub fn synth_source(spec: &CorpusSpec, speaker: usize, len: usize, rng: &mut impl Rng) -> Vec<f32> {
    let rate = spec.sample_rate as f64;
    let (lo, hi) = spec.band(speaker);
    let mut tonal = vec![0.0f64; len];
    for _ in 0..spec.tones.max(1) {
        let f = rng.gen_range(lo..hi);
        let amp = rng.gen_range(0.5..1.0);
        let phase = rng.gen_range(0.0..TAU);
        let fm = rng.gen_range(spec.modulation.0..=spec.modulation.1);
        let env_phase = rng.gen_range(0.0..TAU);
        for (i, y) in tonal.iter_mut().enumerate() {
            let t = i as f64 / rate;
            let env = 0.5 * (1.0 + (TAU * fm * t + env_phase).sin());
            *y += amp * env * (TAU * f * t + phase).sin();
        }
    }
    let white: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let center = (lo + hi) / 2.0;
    let mut noise = bandpass(&white, center, center / (hi - lo), rate);
    let scale = spec.noise_level * rms(&tonal) / rms(&noise).max(1e-12);
    noise.iter_mut().for_each(|v| *v *= scale);
    let sum: Vec<f64> = tonal.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let gain = spec.target_rms / rms(&sum).max(1e-12);
    sum.iter().map(|v| (v * gain) as f32).collect()
}

/// `spec.count` mixtures of `spec.sources` distinct speakers, reproducible
/// from `spec.seed`.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<MixtureSample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = spec.samples();
    let speakers = spec.speaker_count();
    Ok((0..spec.count)
        .map(|_| {
            let chosen = rand::seq::index::sample(&mut rng, speakers, spec.sources).into_vec();
            let sources = chosen.iter().map(|&k| synth_source(spec, k, len, &mut rng)).collect();
            MixtureSample::from_sources(sources, spec.sample_rate, chosen)
        })
        .collect())
}
