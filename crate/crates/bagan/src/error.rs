//! Error type shared across the crate, with the CLI exit-code mapping.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes do not compose.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Training produced a non-finite loss or otherwise failed to proceed.
    #[error("training diverged during {stage}: {detail}")]
    Divergence { stage: String, detail: String },
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A configuration file or flag could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
    /// A data or model file is malformed (bad magic, truncation, ...).
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config/usage, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ShapeMismatch(_) | Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::NonFinite(_) | Error::Divergence { .. } => 3,
            Error::Format { .. } | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
