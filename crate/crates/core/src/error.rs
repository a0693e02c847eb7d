use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Persistence failures keep distinct variants (`Malformed`, `Version`,
/// `Truncated`, `EmptyFile`) so callers can tell a bad file from a stale one.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("permutation size mismatch: permutation has {perm} entries, geometry has {n} rows")]
    PermutationSizeMismatch { perm: usize, n: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("kabsch requires zero-CoM inputs (max |CoM| = {0:.3e})")]
    NotCentered(f64),

    #[error("oracle size limit: n = {0} exceeds 8")]
    OracleSizeLimit(usize),

    #[error("empty coupling")]
    EmptyCoupling,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("pair must be OMT-aligned")]
    PairNotAligned,

    #[error("solver budget exceeded after {0} steps")]
    SolverBudgetExceeded(usize),

    #[error("purification rejected all samples")]
    PurificationRejectedAll,

    #[error("spec inconsistent with validity rule: {0}")]
    InconsistentSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing forward cache: call forward before backward")]
    MissingCache,

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("unsupported version {found} in {path} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("truncated file {path}: {reason}")]
    Truncated { path: PathBuf, reason: String },

    #[error("empty file {0}")]
    EmptyFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn truncated(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Truncated {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by input data rather than by the caller's usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidConfig(_))
    }
}
