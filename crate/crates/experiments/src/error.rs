use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The configuration document is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sbl_core::SblError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed results: {0}")]
    Results(String),
}

impl ExperimentError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
