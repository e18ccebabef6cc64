use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed JSON or a structurally invalid document.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported construct `{kind}` at {location}")]
    Unsupported { kind: String, location: String },

    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature mode error: {0}")]
    Mode(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("insufficient grid coverage: {0}")]
    Coverage(String),

    #[error("point outside domain: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn arity(expected: usize, found: usize) -> Self {
        Error::Arity { expected, found }
    }
}
