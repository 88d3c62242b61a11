use thiserror::Error;

/// Errors produced by model construction, the numerical routines, and the
/// integrators.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter out of numeric range")]
    ParameterOutOfRange,

    #[error("eta lies outside the open interior of the moment polytope")]
    EtaOutsideDomain,

    #[error("rank-deficient model: centered observables do not span the parameter space")]
    RankDeficientModel,

    #[error(
        "Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations"
    )]
    NonConvergence { residual: f64, iterations: usize },

    #[error("singular metric")]
    SingularMetric,

    #[error("negative time {0} rejected")]
    NegativeTime(f64),

    #[error("integration error at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve not length-measurable under G: G(X,X) = {0:.3e}")]
    LengthNotMeasurable(f64),

    #[error("observable index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("model file: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
