use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: non-finite value {value:?} in column `{column}`")]
    NonFinite {
        line: u64,
        column: String,
        value: String,
    },

    #[error("line {line}: label {label:?} outside the declared range {range}")]
    LabelOutOfRange {
        line: u64,
        label: String,
        range: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("unknown sample id `{0}`")]
    UnknownId(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("report version {found} is not supported (expected {expected})")]
    ReportVersion { found: String, expected: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("wrong task: {0}")]
    WrongTask(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fold {fold}: empty training set")]
    EmptyTrainingSet { fold: usize },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("external learner: {0}")]
    Subprocess(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("interrupted after {completed} runs; checkpoint written to {}", checkpoint.display())]
    Interrupted { completed: usize, checkpoint: PathBuf },

    #[error("interrupted after {completed} runs (no checkpoint path configured)")]
    InterruptedNoCheckpoint { completed: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
