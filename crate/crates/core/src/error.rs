use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("NonFiniteField: field contains a non-finite value")]
    NonFiniteField,

    #[error("InvalidTimestep: dt must be positive and finite, got {0}")]
    InvalidTimestep(f64),

    #[error(
        "DelocalizedDensity: circular resultant length {resultant:.3} on axis {axis} is below 0.1"
    )]
    DelocalizedDensity { axis: usize, resultant: f64 },

    #[error("AnnihilatedState: post-localization norm {norm:e} is below 1e-300")]
    AnnihilatedState { norm: f64 },

    #[error("FilterDegenerate: effective sample size {ess:.2} fell below 10")]
    FilterDegenerate { ess: f64 },

    #[error("CovarianceBlowup: covariance lost positive definiteness at t={t}")]
    CovarianceBlowup { t: f64 },

    #[error("ClipMassExceeded: negative density mass {mass:e} clipped in one step exceeds 1e-4")]
    ClipMassExceeded { mass: f64 },

    #[error("EquivalenceBroken: L1(|psi|^2, rho) = {l1:.4} exceeded 0.5 at t={t}")]
    EquivalenceBroken { t: f64, l1: f64 },

    #[error("ZeroMass: density integrates to zero and cannot be normalized")]
    ZeroMass,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
