//! Named-tensor container and model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MFT2"  version:u32  count:u32
//! count × { name_len:u32  name:utf8  dtype:u8  rank:u32  dims:u64×rank  payload }
//! ```
//!
//! `dtype` 0 is `f32` (payload `4·Πdims` bytes); 1 is raw bytes (rank 1,
//! payload `dims[0]` bytes), used for the serialised model config.

use std::path::Path;

use indexmap::IndexMap;
use mf2_tensor::Tensor;

use crate::params::ParamStore;
use crate::separator::{ModelConfig, Separator};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MFT2";
pub const VERSION: u32 = 1;
/// Archive entry holding the TOML model config of a checkpoint.
pub const CONFIG_ENTRY: &str = "config";

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32 { dims: Vec<u64>, data: Vec<f32> },
    Bytes(Vec<u8>),
}

impl Payload {
    fn dtype(&self) -> u8 {
        match self {
            Payload::F32 { .. } => 0,
            Payload::Bytes(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    entries: IndexMap<String, Payload>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Archive(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Payload> {
        self.entries.get(name)
    }

    fn insert(&mut self, name: &str, payload: Payload) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Archive(format!("duplicate entry `{name}`")));
        }
        self.entries.insert(name.to_string(), payload);
        Ok(())
    }

    pub fn insert_f32(&mut self, name: &str, shape: &[usize], data: Vec<f32>) -> Result<()> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Archive(format!("entry `{name}`: shape {shape:?} does not hold {} values", data.len())));
        }
        self.insert(name, Payload::F32 { dims: shape.iter().map(|&d| d as u64).collect(), data })
    }

    pub fn insert_tensor(&mut self, name: &str, t: &Tensor<f32>) -> Result<()> {
        self.insert_f32(name, t.shape(), t.to_vec())
    }

    pub fn insert_bytes(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        self.insert(name, Payload::Bytes(bytes))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, payload) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(payload.dtype());
            match payload {
                Payload::F32 { dims, data } => {
                    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
                    dims.iter().for_each(|d| out.extend_from_slice(&d.to_le_bytes()));
                    data.iter().for_each(|v| out.extend_from_slice(&v.to_bits().to_le_bytes()));
                }
                Payload::Bytes(b) => {
                    out.extend_from_slice(&1u32.to_le_bytes());
                    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
                    out.extend_from_slice(b);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic { found: bytes[..bytes.len().min(4)].to_vec() });
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Archive(format!("unsupported version {version}")));
        }
        let count = r.u32("entry count")?;
        let mut archive = Self::new();
        for _ in 0..count {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::Archive("entry name is not UTF-8".into()))?
                .to_string();
            let dtype = r.take(1, "dtype")?[0];
            let rank = r.u32("rank")? as usize;
            let dims = (0..rank).map(|_| r.u64("dims")).collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(|| Error::Archive(format!("entry `{name}`: dims {dims:?} overflow")))?;
            let payload = match dtype {
                0 => {
                    let raw = r.take(numel.saturating_mul(4), &name)?;
                    let data = raw.chunks_exact(4).map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap()))).collect();
                    Payload::F32 { dims, data }
                }
                1 if rank == 1 => Payload::Bytes(r.take(numel, &name)?.to_vec()),
                _ => return Err(Error::Archive(format!("entry `{name}`: unsupported dtype {dtype} with rank {rank}"))),
            };
            archive.insert(&name, payload)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Archive(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Config entry followed by every parameter in construction order.
pub fn checkpoint_archive(model: &Separator<f32>) -> Result<TensorArchive> {
    let mut a = TensorArchive::new();
    let text = toml::to_string(model.config()).map_err(|e| Error::Archive(format!("config serialisation: {e}")))?;
    a.insert_bytes(CONFIG_ENTRY, text.into_bytes())?;
    for (name, t) in model.params().iter() {
        a.insert_tensor(name, t)?;
    }
    Ok(a)
}

pub fn save_checkpoint(model: &Separator<f32>, path: impl AsRef<Path>) -> Result<()> {
    checkpoint_archive(model)?.save(path)
}

/// The model config stored in a checkpoint.
pub fn archived_config(a: &TensorArchive) -> Result<ModelConfig> {
    match a.get(CONFIG_ENTRY) {
        Some(Payload::Bytes(b)) => {
            let text = std::str::from_utf8(b).map_err(|_| Error::Archive("config entry is not UTF-8".into()))?;
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
        }
        _ => Err(Error::Archive(format!("missing `{CONFIG_ENTRY}` entry"))),
    }
}

/// Copies archived weights into `params`, failing on the first tensor whose
/// name or shape does not line up.
pub fn load_params(params: &ParamStore<f32>, a: &TensorArchive) -> Result<()> {
    for (name, t) in params.iter() {
        let mismatch = |detail: String| Error::CheckpointMismatch { name: name.to_string(), detail };
        match a.get(name) {
            Some(Payload::F32 { dims, data }) => {
                let dims: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
                if dims != t.shape() {
                    return Err(mismatch(format!("checkpoint shape {dims:?}, model shape {:?}", t.shape())));
                }
                t.set_data(data)?;
            }
            Some(Payload::Bytes(_)) => return Err(mismatch("stored as bytes, expected f32".into())),
            None => return Err(mismatch(format!("missing from checkpoint, model shape {:?}", t.shape()))),
        }
    }
    if let Some(extra) = a.names().find(|n| *n != CONFIG_ENTRY && params.get(n).is_none()) {
        return Err(Error::CheckpointMismatch { name: extra.to_string(), detail: "not present in model".into() });
    }
    Ok(())
}

/// Rebuilds a model from a checkpoint, using `config` when given instead of
/// the archived one.
pub fn load_checkpoint(path: impl AsRef<Path>, config: Option<&ModelConfig>) -> Result<Separator<f32>> {
    let a = TensorArchive::load(path)?;
    let cfg = match config {
        Some(c) => c.clone(),
        None => archived_config(&a)?,
    };
    let model = Separator::new(&cfg, 0)?;
    load_params(model.params(), &a)?;
    Ok(model)
}
