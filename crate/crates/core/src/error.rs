use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A raw model input is non-finite or has the wrong sign.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    /// An operation was called outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The stability certificate cannot be built for these parameters.
    #[error("certificate inapplicable: {0}")]
    Inapplicable(String),

    /// The configuration is valid but not supported by this operation.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A constructed object failed one of its own invariants.
    #[error("internal consistency check failed: {0}")]
    Construction(String),

    /// Iterative numerics did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The integrator produced a non-finite state.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// Dimensions of user-supplied matrices do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Configuration or input file problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
