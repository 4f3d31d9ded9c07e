use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A combination of parameters that cannot be evaluated, e.g. a second-order
    /// approximant requested for a finite λ without τ.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal invariant was violated by a numeric result.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// Two point sets that must match do not.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// A reference data file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
