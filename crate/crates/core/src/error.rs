use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A sequence of run outcomes matches no row of the referee's decision table.
    #[error("inconsistent outcome: {0}")]
    InconsistentOutcome(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::domain(alloc::format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
