use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("non-conforming constraints: {0}")]
    Constraints(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("interface flux compatibility residual {0:.3e} exceeds 1e-8")]
    Compatibility(f64),

    #[error("flux mean {0:.3e} exceeds 1e-6; homogenized tensor inconsistent with correctors")]
    FluxMean(f64),

    #[error("single-layer Gram matrix is not positive definite")]
    GramNotPositive,

    #[error("resolvent system is singular at lambda = {0}")]
    SingularResolvent(f64),

    #[error("mesh resolution check failed: refinement changed the error by ratio {ratio:.3} (limit {limit})")]
    Resolution { ratio: f64, limit: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }
}
