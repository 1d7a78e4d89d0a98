//! Error taxonomy shared by the whole crate.
//!
//! The CLI maps each variant to a process exit code: configuration
//! problems exit 2, numerical aborts exit 3, I/O failures exit 4.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, dimensions that cannot be reconciled before
    /// any computation starts, unknown problem ids, bad files on disk.
    #[error("configuration error: {0}")]
    Config(String),

    /// Runtime dimension mismatch between tensors that were expected to
    /// line up (batch columns vs. network input, grid vs. grid, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// A caller broke an API contract that is not a pure shape issue
    /// (unequal paired batch sizes, too few samples for a statistic, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// NaN/Inf encountered, solver failed to converge, degenerate inputs.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Contract(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("invalid JSON: {e}"))
    }
}
