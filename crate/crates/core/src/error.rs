use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparameters(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A state that the kernels must never reach from a valid chain.
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// The caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("{file}:{line}: {message}")]
    Ingest {
        file: String,
        line: u64,
        message: String,
    },
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
