use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: label {value:?} is not 0 or 1")]
    NonBinaryLabel { row: usize, value: String },
    #[error("row {row}, column `{column}`: value is not a finite number")]
    NonFiniteValue { row: usize, column: String },
    #[error("rows {first} and {second} share the same location")]
    DuplicateLocation { first: usize, second: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("true probabilities have zero variance")]
    DegenerateVariance,
    #[error("unsupported Matern smoothness {0}; expected 0.5, 1.5 or 2.5")]
    InvalidSmoothness(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Cholesky factorization failed ({0})")]
    CholeskyFailure(String),
    #[error("neighbor system for ordered position {0} is singular")]
    SingularNeighborSystem(usize),
    #[error("GLS normal equations are singular")]
    SingularSystem,
    #[error("node is empty")]
    EmptyNode,
    #[error("cut leaves a child node empty")]
    EmptyChild,
    #[error("too few samples: need at least {needed}, have {available}")]
    TooFewSamples { needed: usize, available: usize },
    #[error("value {0} is outside the function domain")]
    OutOfDomain(f64),
    #[error("only {found} probe points have estimates inside (0,1); need at least {needed}")]
    InsufficientInRangePoints { found: usize, needed: usize },
    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, actual })
        }
    }
}
