use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a distribution function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature or root finding did not reach the requested tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Posterior of an arm is improper (no prior information and no data).
    #[error("posterior undefined for arm {arm}: q0 = 0 and n = 0")]
    UndefinedPosterior { arm: usize },

    /// Trial data that cannot have come from real responses.
    #[error("inconsistent data: {0}")]
    DataInconsistency(String),

    #[error("infeasible design: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
