use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input bytes: capture files, blobs, archives, configuration.
    #[error("format error: {0}")]
    Format(String),

    /// A blob inside an archive failed validation.
    #[error("format error in member `{member}`: {reason}")]
    Member { member: String, reason: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    /// Evaluation outside the support of a closed-form model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("arithmetic error: {0}")]
    Arithmetic(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined focus table: no packets")]
    EmptyTable,

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn member(member: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Member {
            member: member.into(),
            reason: reason.into(),
        }
    }
}
