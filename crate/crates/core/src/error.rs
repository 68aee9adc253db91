use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid spacing: {0}")]
    InvalidSpacing(String),

    #[error("invalid pixel count {0} (must be finite and non-negative)")]
    InvalidCount(f64),

    #[error("invalid slice metadata: {0}")]
    InvalidMetadata(String),

    #[error("inconsistent scan for patient {patient_id}: {detail}")]
    InconsistentScan { patient_id: String, detail: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("invalid fold count k={k} for n={n} (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("too few prediction pairs: {0} (need at least 2)")]
    TooFewPairs(usize),

    #[error("invalid k={k} for {n} training instances")]
    InvalidK { k: usize, n: usize },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    TrainingDiverged { epoch: usize },

    #[error("cannot invert model for '{feature}': coefficient {coefficient} is zero")]
    NotInvertible { feature: String, coefficient: f64 },

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("unknown algorithm '{name}'; valid names: {valid}")]
    UnknownAlgorithm { name: String, valid: String },

    #[error("unknown task '{0}'; valid tasks: mediastinal-from-epicardial, epicardial-from-mediastinal, mediastinal-unprocessed, epicardial-unprocessed")]
    UnknownTask(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("time budget exceeded")]
    DeadlineExceeded,

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("missing metadata for patient {0}")]
    MissingMetadata(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Error {
        Error::Path {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping path context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Path { source, .. } => source.root(),
            other => other,
        }
    }
}
