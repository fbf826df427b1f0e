use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum NetcpError {
    /// A configuration value or argument is outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Input data is malformed or degenerate.
    #[error("data error: {0}")]
    Data(String),
    /// Floating point breakdown in a computation that is finite analytically.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A caller violated an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// A computation would exceed its configured work budget.
    #[error("resource error: {0}")]
    Resource(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = NetcpError> = std::result::Result<T, E>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(NetcpError::Parameter(msg.into()))
}

pub(crate) fn data_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(NetcpError::Data(msg.into()))
}
