use thiserror::Error;

/// Crate-wide error type. Variants map to the failure categories the public
/// API can report; internal shape bugs panic instead.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible dimensions between caller-supplied values.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A documented precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values or a numerically impossible operation.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Operation invalid in the object's current state.
    #[error("invalid state: {0}")]
    State(String),

    /// Transition matrix cannot be inverted for backward correction.
    #[error("transition matrix is numerically singular (condition number {cond:.3e})")]
    SingularTransition { cond: f64 },

    /// Malformed file contents. `location` is "path:line" where known.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Invalid experiment configuration. `field` is "section.key".
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
