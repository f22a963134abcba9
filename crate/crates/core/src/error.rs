use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid target {value} at row {row} for {loss} loss")]
    InvalidTarget {
        loss: &'static str,
        row: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("query selects no rows")]
    EmptyQuery,

    #[error("zero denominator in closed-form weight")]
    ZeroDenominator,

    #[error("order is not injective: row {0} appears twice")]
    NonInjectiveOrder(usize),

    #[error("query matrix is rank deficient")]
    RankDeficient,

    #[error("enumeration too large: more than {limit} candidates")]
    Explosion { limit: usize },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: cannot parse `{cell}` as a number")]
    ParseCell {
        path: PathBuf,
        row: usize,
        column: String,
        cell: String,
    },

    #[error("{path}: file has no data rows")]
    EmptyFile { path: PathBuf },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed model file at `{path}`: {message}")]
    MalformedModel { path: String, message: String },

    #[error("model features not found in data: {}", missing.join(", "))]
    FeatureMismatch { missing: Vec<String> },

    #[error("unknown synthetic dataset `{0}`")]
    UnknownGenerator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
