use std::path::PathBuf;

use crate::history::TrainingHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },

    #[error("duplicate epoch {epoch} at line {line}")]
    DuplicateEpoch { epoch: usize, line: u64 },

    #[error("non-finite value at line {line}")]
    InvalidValue { line: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training data holds a single class")]
    DegenerateTraining,

    #[error("stratification failed: class {class} has {count} examples, need at least {needed}")]
    StratificationError {
        class: &'static str,
        count: usize,
        needed: usize,
    },

    #[error("model format error: {0}")]
    ModelFormatError(String),

    #[error("correlation undefined for a constant series")]
    UndefinedCorrelation,

    #[error("calibration needs both classes present")]
    DegenerateCalibration,

    #[error("segment too short: {0}")]
    SegmentTooShort(String),

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("epoch {epoch} does not follow last observed epoch {last}")]
    OutOfOrderEpoch { epoch: usize, last: usize },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        partial: Box<TrainingHistory>,
    },

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
