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

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("label column `{column}` has non-binary value `{value}` at row {row}")]
    NonBinaryLabel {
        column: String,
        value: String,
        row: usize,
    },

    #[error("labels must contain both classes")]
    SingleClassLabels,

    #[error("unparseable numeric cell `{value}` in column `{column}` at row {row}")]
    UnparseableCell {
        column: String,
        value: String,
        row: usize,
    },

    #[error("group `{group}` has no {missing}")]
    DegenerateGroup { group: String, missing: &'static str },

    #[error("invalid group spec `{name}`: {reason}")]
    InvalidGroupSpec { name: String, reason: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("unknown feature column `{0}`")]
    UnknownFeature(String),

    #[error("degenerate base rate for {what}: {value}")]
    DegenerateRate { what: String, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at iteration {iteration}: objective is not finite")]
    Diverged { iteration: usize },

    #[error("reweighing loop {iteration}: {source}")]
    LoopIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{notion} is not supported by {operation}")]
    UnsupportedNotion {
        notion: &'static str,
        operation: &'static str,
    },
}
