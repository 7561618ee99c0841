use thiserror::Error;

/// Errors raised by the model, the circuit solver and the I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for errors caused by user input (configuration, parameters, files)
    /// rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::InvalidArgument(_) | Error::Config(_) | Error::Csv(_) | Error::Io(_))
    }
}
