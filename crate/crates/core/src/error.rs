use alloc::string::String;

/// Errors raised by the numerical and statistical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Non-finite values in user data.
    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// A numerical procedure failed (root not bracketed, no convergence).
    #[error("computation error: {0}")]
    Computation(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// Logistic fit diverges because a covariate separates the groups.
    #[error("perfect separation in propensity model (covariate `{covariate}`)")]
    Separation { covariate: String },

    #[error("collinear design matrix: {0}")]
    Collinearity(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("infeasible matching: {treated} treated units but only {external} external units")]
    Infeasible { treated: usize, external: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
