use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid canonical correlations: {0}")]
    InvalidRho(String),
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numeric(#[from] gepey::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
