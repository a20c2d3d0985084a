use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("{what} = {value} is out of range {min}..={max}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error(
        "within-view covariance of view {view} is not positive definite \
         (smallest eigenvalue {min_eigenvalue:e}); try a larger regularization"
    )]
    Singular { view: usize, min_eigenvalue: f64 },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("ragged CSV {}: row {row} has {found} fields, expected {expected}", path.display())]
    RaggedCsv {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}: label {label} does not name a known class ({classes} classes)", path.display())]
    UnknownClass {
        path: PathBuf,
        line: usize,
        label: String,
        classes: usize,
    },

    #[error("class {0} appears in both the seen and the unseen split")]
    SplitOverlap(usize),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("need at least {needed} classes on each side of the split, have {available} in total")]
    TooFewClasses { needed: usize, available: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
