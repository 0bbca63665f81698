use thiserror::Error;

/// A callback or elementary function was evaluated outside its domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {what} (value {value})")]
pub struct DomainError {
    pub what: String,
    pub value: f64,
}

impl DomainError {
    pub fn new(what: impl Into<String>, value: f64) -> Self {
        Self {
            what: what.into(),
            value,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error("unit {unit}, transition {transition}: {source}")]
    Transition {
        unit: usize,
        transition: usize,
        #[source]
        source: DomainError,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
