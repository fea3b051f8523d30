use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates one of its documented invariants.
    #[error("invalid parameter: {0}")]
    Invalid(String),

    /// A function argument lies outside its mathematical domain.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// The fidelity lower bound is non-positive, so no virtual coherent
    /// source reproduces the real one.
    #[error("no secure mapping: fidelity lower bound {0} is not positive")]
    NoSecureMapping(f64),

    #[error("no effective windows")]
    NoEffectiveWindows,

    #[error("no untagged bits")]
    NoUntaggedBits,

    #[error("{equation}: solver did not converge (log-residual {residual:e})")]
    NonConvergence { equation: &'static str, residual: f64 },

    #[error("no secure distance")]
    NoSecureDistance,

    /// Malformed configuration input; names the offending key.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::Config { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
