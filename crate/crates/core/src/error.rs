//! Error taxonomy shared across the toolkit.
//!
//! Each variant maps to a distinct process exit code so callers of the CLI
//! can distinguish error classes without parsing messages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An input file does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input data is structurally valid but semantically unusable.
    #[error("data error: {0}")]
    Data(String),

    /// A serialized artifact is corrupt or not in the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// A model file was written by an incompatible format version.
    #[error("format error: model file has format version {found}, this build supports version {supported}")]
    Version { found: u32, supported: u32 },

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Distinct nonzero exit code per error class (0 is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Schema(_) => 3,
            Error::Data(_) => 4,
            Error::Format(_) | Error::Version { .. } => 5,
            Error::Io(_) => 6,
            Error::Diverged { .. } => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
