use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Broad category of an [`Error`]; the CLI maps each to a distinct exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller passed arguments that violate a documented precondition.
    Usage,
    /// Input data is malformed, incomplete or degenerate.
    Data,
    /// An iterative routine failed or a system was numerically singular.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid tensor mode {0}: expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("channel `{0}` has zero variance")]
    DegenerateChannel(String),

    #[error("subject `{subject}`{}: {reason}", channel.as_ref().map(|c| alloc::format!(", channel `{c}`")).unwrap_or_default())]
    Ingest {
        subject: String,
        channel: Option<String>,
        reason: String,
    },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (relative off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidMode(_) | Error::Shape(_) | Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NonFinite | Error::DegenerateChannel(_) | Error::Ingest { .. } => ErrorKind::Data,
            Error::NoConvergence { .. } | Error::Singular(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
