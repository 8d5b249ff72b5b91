use thiserror::Error;

use crate::model::PartitionerModel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("stale cache: expected dataset checksum {expected:016x}, file was built for {found:016x}")]
    StaleCache { expected: u64, found: u64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite gradient in parameter group {group}")]
    NonFiniteGradient { group: usize },

    /// Training produced a non-finite loss. Carries the model as it was before
    /// the offending step.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize, last_good: Box<PartitionerModel> },

    /// Every point already shares its bin with all of its neighbors, so the
    /// next ensemble member would receive all-zero weights.
    #[error("ensemble saturated: no misplaced neighbors remain")]
    EnsembleSaturated,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
