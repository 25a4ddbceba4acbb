use thiserror::Error;

#[derive(Debug, Error)]
pub enum VplError {
    /// Invalid parameters; nothing was computed.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A numerical safeguard tripped during a computation.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("linear algebra: {0}")]
    Linalg(String),
    /// Not enough data for the requested diagnostic.
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

pub type Result<T> = std::result::Result<T, VplError>;

impl From<ndarray_linalg::error::LinalgError> for VplError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        VplError::Linalg(e.to_string())
    }
}
