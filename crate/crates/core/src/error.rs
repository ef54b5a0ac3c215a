use thiserror::Error;

/// Errors raised by the simulation, inference and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or run configuration violates its parameter constraints.
    #[error("invalid parameters: {0}")]
    Validation(String),

    /// A numerical routine (quadrature, root finding) did not converge.
    #[error("numerical failure in {context}: {detail}")]
    Numeric {
        context: &'static str,
        detail: String,
    },

    /// The requested accuracy would exceed the jump budget.
    #[error("{message} (about {required:.3e} jumps would be needed)")]
    Resource { message: String, required: f64 },

    /// Malformed input data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            Error::Io(err.into())
        } else {
            Error::Parse {
                line: err.line(),
                message: err.to_string(),
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
