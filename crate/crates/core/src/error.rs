use std::path::PathBuf;

use mf2_tensor::TensorError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("input length {len} not usable: need at least {min} samples and a multiple of {multiple}")]
    InputLength { len: usize, min: usize, multiple: usize },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("wav field `{field}`: {detail}")]
    Wav { field: &'static str, detail: String },

    #[error("archive magic is {found:?}, expected \"MFT2\"")]
    BadMagic { found: Vec<u8> },

    #[error("archive: {0}")]
    Archive(String),

    #[error("checkpoint mismatch at tensor `{name}`: {detail}")]
    CheckpointMismatch { name: String, detail: String },

    #[error("unsupported source count {0}: permutation search handles 2..=5")]
    SourceCount(usize),

    #[error("reference signal is identically zero")]
    ZeroReference,

    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("source pool has {available} distinct speakers, {needed} required")]
    PoolTooSmall { available: usize, needed: usize },

    #[error("non-finite loss {loss} at epoch {epoch}, step {step} (pre-clip grad norm {grad_norm})")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64, grad_norm: f64 },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Tensor(_) => "tensor",
            Error::InputLength { .. } => "input-length",
            Error::Config { .. } => "config-field",
            Error::ConfigParse(_) => "config-parse",
            Error::Wav { .. } => "wav",
            Error::BadMagic { .. } => "archive-magic",
            Error::Archive(_) => "archive",
            Error::CheckpointMismatch { .. } => "checkpoint-mismatch",
            Error::SourceCount(_) => "source-count",
            Error::ZeroReference => "zero-reference",
            Error::LengthMismatch(..) => "length-mismatch",
            Error::PoolTooSmall { .. } => "pool-too-small",
            Error::NonFiniteLoss { .. } => "non-finite-loss",
            Error::Manifest(_) => "manifest",
            Error::Io { .. } => "io",
        }
    }
}
