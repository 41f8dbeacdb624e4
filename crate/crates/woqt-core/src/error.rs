//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by any woqt operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("not a WOQT container (bad magic bytes)")]
    BadMagic,

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checksum mismatch for tensor '{name}'")]
    ChecksumMismatch { name: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate tensor name '{0}' in bundle")]
    DuplicateName(String),

    #[error("invalid bit width {0}: must be in 2..=8")]
    InvalidBits(u8),

    #[error("invalid group size {group}: {reason}")]
    InvalidGroupSize { group: usize, reason: String },

    #[error("layout ({rows} rows/group {group}) incompatible with tensor of {tensor_rows} rows")]
    IncompatibleLayout {
        rows: usize,
        group: usize,
        tensor_rows: usize,
    },

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("code {code} out of range for {bits}-bit quantization")]
    CodeOutOfRange { code: i32, bits: u8 },

    #[error("corrupt packed payload: {0}")]
    CorruptPayload(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid selection policy: {0}")]
    InvalidPolicy(String),

    #[error("no latency entry for (batch={batch}, input_len={input_len}) in table '{table}'")]
    MissingLatencyKey {
        table: String,
        batch: u32,
        input_len: u32,
    },

    #[error("latency table error: {0}")]
    LatencyTable(String),

    #[error("tensor '{0}' has no quantization assignment and is not exempt")]
    UnassignedTensor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
