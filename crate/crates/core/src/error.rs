use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed network or state request (unknown mode, coincident ports).
    #[error("configuration error: {0}")]
    Config(String),
    /// Out-of-range gate or chain parameter.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Operation called with the wrong gate kind or party set.
    #[error("usage error: {0}")]
    Usage(String),
    /// Malformed or invalid `.cfg` program.
    #[error("{0}")]
    Parse(#[from] crate::dsl::ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;
