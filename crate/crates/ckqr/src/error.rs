use thiserror::Error;

/// Errors shared across the estimation and simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("solver did not converge after {iterations} iterations (grad norm {grad_norm:.3e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("hessian is numerically singular")]
    SingularHessian,
    #[error("residuals carry no usable scale")]
    DegenerateResiduals,
    #[error("leading bias term is zero; the optimal bandwidth is undefined")]
    ZeroBias,
    #[error("design has no closed-form oracle")]
    UnsupportedDesign,
    #[error("more than half of the stage-one weights hit the clamp")]
    AllWeightsClamped,
    #[error("quantile process failed at {failed} of {total} grid points")]
    ProcessFailed { failed: usize, total: usize },
    #[error("{failed} of {reps} replications failed")]
    TooManyFailures { failed: usize, reps: usize },
    #[error("{0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
