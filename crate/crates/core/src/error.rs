use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("damped normal matrix is not positive definite after diagonal jitter")]
    SolveFailure,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("series has no usable rows")]
    EmptySeries,

    #[error("series is constant, min-max normalization is undefined")]
    DegenerateSeries,

    #[error("series of length {len} is too short (needs at least {needed})")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("split leaves an empty {0} segment")]
    DegenerateSplit(&'static str),

    #[error("zero target value at index {0}, MAPE is undefined")]
    ZeroTarget(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
