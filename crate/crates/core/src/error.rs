use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The activation profile cannot drive the random-features predictions
    /// (for example a linear activation with zero residual variance).
    #[error("unusable activation profile `{name}`: {reason}")]
    Profile { name: String, reason: String },

    /// A model assumption (PSD target, mixture covariances, ...) is violated.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at step {step}: risk {risk:e} (initial {initial:e})")]
    Divergence { step: usize, risk: f64, initial: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
