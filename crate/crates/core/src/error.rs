use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported or corrupt image: {0}")]
    Format(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Divergence { epoch: usize, batch: usize },
    #[error("inference protocol error: {0}")]
    Protocol(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
