//! Crate-wide error type with process exit-code classification.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type. Variants map onto the CLI exit codes so a failure
/// keeps its classification from the library layer to the process boundary.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad field values, inconsistent task/model
    /// combinations, malformed config JSON.
    #[error("config error: {0}")]
    Config(String),
    /// Invalid or unusable data: malformed CSV, dimension mismatches,
    /// degenerate inputs (constant columns, single-class labels, ...).
    #[error("data error: {0}")]
    Data(String),
    /// Training diverged or could not proceed.
    #[error("training error: {0}")]
    Training(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }

    /// Process exit code used by the CLI: 1 config, 2 data, 3 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) => 2,
            Error::Training(_) => 3,
        }
    }
}
