use thiserror::Error;

/// Errors raised by the simulation laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or mismatched dimensions.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Instance too large for the requested operation.
    #[error("capacity exceeded: {what} requires n <= {limit}, got {n}")]
    Capacity {
        what: &'static str,
        limit: usize,
        n: usize,
    },

    /// Non-finite values or a failed numerical routine.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Random graph generation ran out of retries.
    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Capacity { .. } => "capacity",
            Error::Numerical(_) => "numerical",
            Error::Generation(_) => "generation",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Returns a capacity error when `n` exceeds `limit`.
pub(crate) fn check_capacity(what: &'static str, n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::Capacity { what, limit, n })
    } else {
        Ok(())
    }
}
