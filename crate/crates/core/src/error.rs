use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on shapes, dimensions or arguments was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A non-finite or ill-conditioned value was produced.
    #[error("numeric fault: {0}")]
    NumericFault(String),
    /// The input matrix cannot be inverted for the requested control law.
    #[error("singular actuation: {0}")]
    SingularActuation(String),
    /// The model variant does not support the query (e.g. energy of a baseline).
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Prefixes the message of numeric and actuation faults with `ctx`,
    /// leaving other variants untouched.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::NumericFault(m) => Error::NumericFault(format!("{ctx}: {m}")),
            Error::SingularActuation(m) => Error::SingularActuation(format!("{ctx}: {m}")),
            Error::Contract(m) => Error::Contract(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}
