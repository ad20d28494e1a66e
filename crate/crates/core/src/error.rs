use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MildError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical overflow in exp(tA)x at t = {t} (||A||_1 = {norm:.3e})")]
    NumericalOverflow { t: f64, norm: f64 },

    #[error("ill-conditioned resolvent at lambda = {lam}: condition number {condition:.3e}")]
    IllConditionedResolvent { lam: f64, condition: f64 },

    #[error("semigroup has no strong limit at scale t = {t_big:.3e} (stabilization defect {defect:.3e})")]
    NoLimit { t_big: f64, defect: f64 },

    #[error("contraction violated: lambda = {lam} must exceed C*L = {bound}")]
    ContractionViolated { lam: f64, bound: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last defect {defect:.3e})")]
    NoConvergence { iterations: usize, defect: f64 },

    #[error("Lipschitz constant {declared} violated: sampled ratio {measured:.6e}")]
    LipschitzViolated { declared: f64, measured: f64 },

    #[error("trajectories are not comparable: {0}")]
    GridMismatch(String),

    #[error("sweep failed at parameter {param}: {source}")]
    SweepPoint {
        param: f64,
        #[source]
        source: Box<MildError>,
    },
}

pub type Result<T> = std::result::Result<T, MildError>;

pub(crate) fn invalid(msg: impl Into<String>) -> MildError {
    MildError::InvalidInput(msg.into())
}
