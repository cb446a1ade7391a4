//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("header does not match schema (missing: [{}], unexpected: [{}])",
            missing.join(", "), extra.join(", "))]
    HeaderMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("dataset has no data rows")]
    EmptyDataset,

    #[error("all rows removed by preprocessing")]
    EmptyAfterPreprocessing,

    #[error("column '{column}' still has missing cells; run preprocessing first")]
    NotPreprocessed { column: String },

    #[error("column '{column}' contains a non-finite value at row {row}")]
    NonFiniteValue { column: String, row: usize },

    #[error("split leaves an empty side ({n_train} train / {n_test} test rows)")]
    DegenerateSplit { n_train: usize, n_test: usize },

    #[error("feature count mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("label vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("class index {index} out of range for {n_classes} classes")]
    InvalidClassIndex { index: usize, n_classes: usize },

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("non-finite loss at epoch {epoch} while training class {class}")]
    SgdDiverged { class: usize, epoch: usize },

    #[error("non-finite boosting score at round {round}")]
    BoostingDiverged { round: usize },

    #[error("no tree has out-of-bag rows; cannot compute permutation importance")]
    NoOutOfBagRows,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model file format error: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
