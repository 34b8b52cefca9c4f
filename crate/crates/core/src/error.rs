use std::path::PathBuf;

use chrono::NaiveDate;
use sleepcast_kernel::KernelError;
use thiserror::Error;

use crate::data::SubjectId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("duplicate record for subject {subject} on {date}")]
    Conflict { subject: SubjectId, date: NaiveDate },
    #[error("subject {subject}: {len} records, need at least {min}")]
    TooShort { subject: SubjectId, len: usize, min: usize },
    #[error("subject {subject}: {message}")]
    Data { subject: SubjectId, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot fit a normalizer on an empty training set")]
    EmptyTrainingSet,
    #[error("no instances to {0}")]
    NoInstances(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },
    #[error("data lineage violation: {0}")]
    Lineage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("results file {path}: {message}")]
    Results { path: PathBuf, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Errors caused by user input (bad files, flags or configuration) rather than a failed computation.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::Conflict { .. }
                | Error::TooShort { .. }
                | Error::Data { .. }
                | Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::Results { .. }
                | Error::Checkpoint(_)
        )
    }
}
