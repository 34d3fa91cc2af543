use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("inconsistent state: Friedmann residual {residual:e} exceeds tolerance {tolerance:e}")]
    InconsistentState { residual: f64, tolerance: f64 },

    #[error("degenerate fluid: energy density is zero")]
    DegenerateFluid,

    #[error("singularity at X = {0}")]
    Singularity(f64),

    #[error("integrand returned NaN at x = {0}")]
    NanIntegrand(f64),

    #[error("value with log-magnitude {0} is not representable as f64")]
    Overflow(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature did not converge at x = {0}")]
    NotConverged(f64),

    #[error("invalid path: Y became non-finite after {steps} steps")]
    InvalidPath { steps: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
