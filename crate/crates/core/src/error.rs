use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnnError {
    /// A shape, range or precondition requirement was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed binary input (IDX or parameter files).
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EnnError>;

impl EnnError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        EnnError::Contract(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        EnnError::Format { offset, message: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        EnnError::Io { path: path.into(), source }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        // negated so that NaN fails the check
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err($crate::error::EnnError::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
