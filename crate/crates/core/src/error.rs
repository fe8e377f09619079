use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split at {boundary} leaves an empty partition")]
    EmptyPartition { boundary: f64 },
    #[error("split boundary {boundary} outside data range [{min}, {max}]")]
    BoundaryOutOfRange { boundary: f64, min: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("operation requires {expected} mode data")]
    ModeMismatch { expected: &'static str },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{points} points cannot support {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("every candidate period is excluded")]
    CandidatesExhausted,
    #[error("cell has zero volume")]
    DegenerateCell,
    #[error("grid specifications differ")]
    GridMismatch,
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("every parameter in the sweep failed")]
    SweepFailed,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
