use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("requested K = {k} exceeds dimension {dim}")]
    KTooLarge { k: usize, dim: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("too few samples: need at least 2, got {0}")]
    TooFewSamples(usize),
    #[error("need at least two views, got {0}")]
    TooFewViews(usize),
    #[error("projected B matrix is singular")]
    SingularProjection,
    #[error("oracle spectrum sums to zero")]
    ZeroOracle,
    #[error("projection weights are rank deficient")]
    RankDeficient,
    #[error("cannot retract a zero column")]
    ZeroColumn,
    #[error("invalid eigenvalues: {0}")]
    InvalidLambdas(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("weights have rank zero")]
    RankZero,
    #[error("data are degenerate: {0}")]
    DegenerateData(String),
    #[error("optimization has not converged (gradient norm {0:.3e})")]
    NotConverged(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
