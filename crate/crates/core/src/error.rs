use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate weights: no weight is positive")]
    DegenerateWeights,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("collapsed ensemble: parameter covariance has zero trace")]
    CollapsedEnsemble,

    #[error("jump covariance is not positive definite")]
    SingularCovariance,

    #[error("linear regime violated: U^2 + Udot/gamma = {0:e} is negative")]
    LinearRegimeViolated(f64),

    #[error("intensity tracking singular: |det J| = {0:e}")]
    SingularJacobian(f64),

    #[error("prior sample exhausted: effective size {ess:.1} below floor {floor}")]
    PriorSampleExhausted { ess: f64, floor: f64 },

    #[error(
        "prior-force exceeds entropy budget: L22*F2^2 = {prior_term:.4e} > v = {v:.4e}; \
         raise v or lower the counter-force gain a"
    )]
    EntropyBudgetExceeded { prior_term: f64, v: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("transition matrix is reducible: {0}")]
    Reducible(String),

    #[error(
        "simulation budget exhausted during initialization ({sims} draws, {accepted}/{needed} \
         particles accepted); use a larger eps_init"
    )]
    InitBudgetExhausted {
        sims: u64,
        accepted: usize,
        needed: usize,
    },

    #[error("rejection acceptance rate {0:e} is below 1e-6")]
    AcceptanceTooLow(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
