use thiserror::Error;

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },

    #[error("{op}: input length {len} too short for kernel {kernel} (padding {pad})")]
    InputTooShort {
        op: &'static str,
        len: usize,
        kernel: usize,
        pad: usize,
    },

    #[error("{op}: {channels} channels not divisible into {groups} groups")]
    Grouping {
        op: &'static str,
        channels: usize,
        groups: usize,
    },

    #[error("{op}: invalid argument: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("backward() requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
}
