use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("response column `{0}` not found in header")]
    MissingColumn(String),

    #[error("dataset needs at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("empty row index set")]
    EmptySubset,

    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("normal matrix is singular (pivot {pivot:e} below threshold {threshold:e})")]
    SingularDesign { pivot: f64, threshold: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("no live row lies at least L/2 inside the data range")]
    NoInteriorSeed,

    #[error("no live rows to select from")]
    EmptyLive,

    #[error("group design stayed singular after {0} redraws")]
    RedrawExhausted(usize),

    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),

    #[error("model set is empty")]
    EmptyModelSet,

    #[error("model set does not cover the dataset: {0}")]
    CoverageViolation(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 = bad arguments, 3 = data errors, 4 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::InfeasibleSpec(_) => 2,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::MissingColumn(_)
            | Error::TooFewRows { .. }
            | Error::InvalidDataset(_)
            | Error::EmptySubset
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch(..)
            | Error::EmptyInput
            | Error::CoverageViolation(_) => 3,
            Error::SingularDesign { .. }
            | Error::NoInteriorSeed
            | Error::EmptyLive
            | Error::RedrawExhausted(_)
            | Error::EmptyModelSet => 4,
        }
    }
}
