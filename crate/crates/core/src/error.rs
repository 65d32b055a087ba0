use thiserror::Error;

/// Errors raised by the spectral toolkit.
///
/// The variants follow the failure classes of the public operations: a
/// [`Error::Size`] is a dimension or count precondition, a [`Error::Domain`]
/// is a value outside the operation's mathematical domain, and
/// [`Error::Shape`] flags missing structural metadata (such as a token grid).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn size_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Size(msg.into()))
}

pub(crate) fn domain_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
