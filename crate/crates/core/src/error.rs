use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column {0:?} in header")]
    MissingColumn(String),

    #[error("non-numeric cell {value:?} in column {column:?} at row {row}")]
    NonNumericCell {
        value: String,
        column: String,
        row: usize,
    },

    #[error("row {row} has {got} fields, expected {expected}")]
    InconsistentRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("cannot inject {requested} points, only {available} available in the other class")]
    InjectCountTooLarge { requested: usize, available: usize },

    #[error("enumeration limit exceeded: {0}")]
    EnumerationLimit(String),

    #[error("set violates the distinct-coordinates hypothesis: {0}")]
    HypothesisViolated(String),

    #[error("cardinality overflows integer range for n = {n}, d = {d}")]
    CardinalityOverflow { n: usize, d: usize },

    #[error(
        "regression variance model gives a non-positive value ({value:.4}) for {n} intervals; \
         supply the trial count explicitly"
    )]
    RegressionOutOfRange { n: usize, value: f64 },

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
