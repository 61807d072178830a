use thiserror::Error;

/// Errors surfaced by the toolkit. Domain violations are reported with the
/// offending quantity so CLI users can see which precondition failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "circulant embedding produced eigenvalue {value:.3e} below -{tolerance:.3e}; \
         fall back to the dense oracle"
    )]
    EmbeddingNotNonnegative { value: f64, tolerance: f64 },

    #[error("path length {n} exceeds the dense-oracle limit {max}")]
    SizeTooLarge { n: usize, max: usize },

    #[error("covariance factorization failed at pivot {pivot}: matrix not positive definite")]
    FactorizationFailure { pivot: usize },

    #[error(
        "truncation window too small: doubling the window moved the tail estimate by \
         {shift:.3e} (> {allowed:.3e})"
    )]
    WindowTooSmall { shift: f64, allowed: f64 },

    #[error(
        "level infeasible for Monte Carlo: no exceedances in {reps} replications and the \
         predicted count is {expected:.2e}; raise reps or lower the level"
    )]
    InfeasibleLevel { reps: usize, expected: f64 },

    #[error("randomized search could not satisfy the constraint set")]
    SearchBudgetExceeded,

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("threshold function decreases by {drop:.3e} at u = {at:.6e}")]
    NotMonotone { drop: f64, at: f64 },

    #[error(
        "theta extrapolation unstable: fit residual {residual:.3e} exceeds 3x the \
         propagated error {limit:.3e}"
    )]
    ExtrapolationUnstable { residual: f64, limit: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
