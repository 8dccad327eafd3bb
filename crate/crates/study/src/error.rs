use thiserror::Error;

pub type Result<T, E = StudyError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study: {0}")]
    Validation(String),
    #[error("study `{0}` already exists")]
    Conflict(String),
    #[error("unknown study `{0}`")]
    UnknownStudy(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("record `{0}` expired and its pair was reissued")]
    StaleRecord(String),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log or manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] rqi_core::Error),
}
