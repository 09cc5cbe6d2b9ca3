use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mesh dimensions too small or invalid: {0}")]
    DimensionTooSmall(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("surface values do not match the bulk trace")]
    TraceMismatch,
    #[error("load has nonzero generalized mean {mean:e}")]
    NonzeroMean { mean: f64 },
    #[error("linear solve did not reach tolerance: residual {residual:e} > {tol:e}")]
    LinearSolve { residual: f64, tol: f64 },
    #[error("singular matrix: zero pivot at column {column}")]
    SingularMatrix { column: usize },
    #[error("{value} is outside the domain {domain}")]
    DomainViolation { value: f64, domain: String },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("D(beta_gamma) = {surface} is not contained in D(beta) = {bulk}")]
    DomainInclusion { bulk: String, surface: String },
    #[error("mean value {m0} is not in the interior of {domain}")]
    MeanNotInterior { m0: f64, domain: String },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("step rejected at t = {t} after {halvings} time-step halvings")]
    StepRejected { t: f64, halvings: u32 },
    #[error("trajectory not stale: |d_t rho| = {dtrho:e} > {threshold:e}; increase t_end")]
    Staleness { dtrho: f64, threshold: f64 },
    #[error("sink error: {0}")]
    Sink(String),
}
