//! Corpus manifest: a JSON file listing each mixture and its reference files.
//! Paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{wav, MixtureSample};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub mix: PathBuf,
    /// Reference of each source, in order.
    #[serde(default)]
    pub sources: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub sample_rate: u32,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    /// Reads one entry back into memory.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<MixtureSample> {
        let (mix, rate) = wav::read(self.resolve(&entry.mix))?;
        if entry.sources.is_empty() {
            return Err(Error::Manifest(format!("entry {} has no references", entry.id)));
        }
        let sources = entry
            .sources
            .iter()
            .map(|p| {
                let (s, _) = wav::read(self.resolve(p))?;
                if s.len() != mix.len() {
                    return Err(Error::LengthMismatch(s.len(), mix.len()));
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let speakers = (0..sources.len()).collect();
        Ok(MixtureSample { mix, sources, sample_rate: rate, speakers })
    }
}

/// Writes `dir/<id>/mix.wav` and `dir/<id>/source_<k>.wav` for every sample
/// plus `dir/manifest.json`, returning the manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &[MixtureSample]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let sample_rate = corpus.first().map_or(8000, |m| m.sample_rate);
    let mut entries = Vec::with_capacity(corpus.len());
    for (i, m) in corpus.iter().enumerate() {
        let id = format!("mix_{i:04}");
        let sub = dir.join(&id);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mix = PathBuf::from(&id).join("mix.wav");
        wav::write(dir.join(&mix), &m.mix, m.sample_rate)?;
        let sources = m
            .sources
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let p = PathBuf::from(&id).join(format!("source_{}.wav", k + 1));
                wav::write(dir.join(&p), s, m.sample_rate)?;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(ManifestEntry { id, mix, sources });
    }
    let path = dir.join(MANIFEST_FILE);
    Manifest { sample_rate, entries, root: dir.to_path_buf() }.save(&path)?;
    Ok(path)
}
