use thiserror::Error;

/// Errors raised while validating channel instances, choosing scheme
/// parameters, or evaluating bounds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates its domain (non-positive variance, |rho| > 1, ...).
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// The broadcast channel is physically degraded, so the requested
    /// feedback construction does not apply.
    #[error("channel is physically degraded (rho = {rho})")]
    PhysicallyDegraded { rho: f64 },

    /// The chosen parameters only satisfy the power constraint above a
    /// threshold power.
    #[error("power {power} is below the feasibility threshold {threshold}")]
    BelowThreshold { power: f64, threshold: f64 },

    /// A covariance matrix has a clearly negative eigenvalue.
    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    /// The requested quantity has no definition at this input.
    #[error("undefined: {0}")]
    Undefined(&'static str),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid { what, why: why.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
