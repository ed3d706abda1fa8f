//! Dynamic mixing: fresh mixtures drawn from a pool of single-speaker streams.

use rand::Rng;

use super::synth::{synth_source, CorpusSpec};
use super::MixtureSample;
use crate::{Error, Result};

/// Per-source gains are drawn uniformly from `±GAIN_RANGE_DB`.
pub const GAIN_RANGE_DB: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceStream {
    pub speaker: usize,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, Default)]
pub struct SourcePool {
    pub streams: Vec<SourceStream>,
    pub sample_rate: u32,
}

impl SourcePool {
    /// Every reference of every mixture, tagged by its speaker.
    pub fn from_corpus(corpus: &[MixtureSample]) -> Self {
        let sample_rate = corpus.first().map_or(8000, |m| m.sample_rate);
        let streams = corpus
            .iter()
            .flat_map(|m| {
                m.sources
                    .iter()
                    .zip(&m.speakers)
                    .map(|(s, &speaker)| SourceStream { speaker, samples: s.clone() })
            })
            .collect();
        Self { streams, sample_rate }
    }

    /// `per_speaker` fresh utterances for each of the spec's speakers.
    pub fn synth(spec: &CorpusSpec, per_speaker: usize, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let len = spec.samples();
        let streams = (0..spec.speaker_count())
            .flat_map(|k| std::iter::repeat_n(k, per_speaker))
            .map(|k| SourceStream { speaker: k, samples: synth_source(spec, k, len, rng) })
            .collect();
        Ok(Self { streams, sample_rate: spec.sample_rate })
    }

    pub fn speakers(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.streams.iter().map(|s| s.speaker).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Debug, Clone)]
pub struct DynamicMix {
    pub sample: MixtureSample,
    pub gains_db: Vec<f64>,
    /// Pool stream index and crop offset of each source.
    pub picks: Vec<(usize, usize)>,
}

/// Draws `sources` streams from distinct speakers, crops each to `len`
/// samples at a random offset (zero-padding short streams), applies a random
/// gain in `±5 dB` and sums.
pub fn dynamic_mix(pool: &SourcePool, sources: usize, len: usize, rng: &mut impl Rng) -> Result<DynamicMix> {
    let speakers = pool.speakers();
    if speakers.len() < sources {
        return Err(Error::PoolTooSmall { available: speakers.len(), needed: sources });
    }
    let chosen = rand::seq::index::sample(rng, speakers.len(), sources).into_vec();
    let mut out = Vec::with_capacity(sources);
    let mut gains_db = Vec::with_capacity(sources);
    let mut picks = Vec::with_capacity(sources);
    let mut ids = Vec::with_capacity(sources);
    for k in chosen.into_iter().map(|i| speakers[i]) {
        let candidates: Vec<usize> = (0..pool.streams.len()).filter(|&i| pool.streams[i].speaker == k).collect();
        let idx = candidates[rng.gen_range(0..candidates.len())];
        let stream = &pool.streams[idx].samples;
        let offset = if stream.len() > len { rng.gen_range(0..=stream.len() - len) } else { 0 };
        let g_db = rng.gen_range(-GAIN_RANGE_DB..=GAIN_RANGE_DB);
        let g = 10f64.powf(g_db / 20.0) as f32;
        let mut crop: Vec<f32> = stream.iter().skip(offset).take(len).map(|v| v * g).collect();
        crop.resize(len, 0.0);
        out.push(crop);
        gains_db.push(g_db);
        picks.push((idx, offset));
        ids.push(k);
    }
    Ok(DynamicMix { sample: MixtureSample::from_sources(out, pool.sample_rate, ids), gains_db, picks })
}
