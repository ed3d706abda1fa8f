//! Synthetic corpora, dynamic mixing and file I/O.

mod manifest;
mod mixing;
mod synth;
pub mod wav;

pub use manifest::{write_corpus, Manifest, ManifestEntry};
pub use mixing::{dynamic_mix, DynamicMix, SourcePool, SourceStream, GAIN_RANGE_DB};
pub use synth::{synth_corpus, synth_source, CorpusSpec};

/// One mixture with its references. `mix` is the exact sample-wise sum of
/// `sources` (summed in order).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub mix: Vec<f32>,
    pub sources: Vec<Vec<f32>>,
    pub sample_rate: u32,
    /// Speaker index of each source.
    pub speakers: Vec<usize>,
}

impl MixtureSample {
    pub fn from_sources(sources: Vec<Vec<f32>>, sample_rate: u32, speakers: Vec<usize>) -> Self {
        let len = sources.first().map_or(0, Vec::len);
        assert!(sources.iter().all(|s| s.len() == len), "sources must share one length");
        let mut mix = vec![0.0f32; len];
        for s in &sources {
            mix.iter_mut().zip(s).for_each(|(m, v)| *m += v);
        }
        Self { mix, sources, sample_rate, speakers }
    }

    pub fn len(&self) -> usize {
        self.mix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mix.is_empty()
    }
}
