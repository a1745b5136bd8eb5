use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CimError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={max}")]
    Range { index: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pipeline failed at eps = {eps}: {source}")]
    Pipeline {
        eps: f64,
        #[source]
        source: Box<CimError>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CimError {
    fn from(e: std::io::Error) -> Self {
        CimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CimError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(CimError::Domain(msg.into()))
}
