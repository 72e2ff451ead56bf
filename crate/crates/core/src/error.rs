use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the clustering toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("matrix contains non-finite values")]
    NonFinite,
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("class {class} has {available} samples, {required} required")]
    InsufficientClassSize {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("eigendecomposition failed to converge")]
    EigFailure,
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("algorithm `{0}` is reserved but not implemented")]
    NotImplemented(String),
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("empty score list")]
    Empty,
    #[error("image shape {dx}x{dy} does not match vector length {len}")]
    ShapeMismatch { dx: usize, dy: usize, len: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
