use thiserror::Error;

/// Errors raised by the semigroup, splitting, shadowing and recurrence routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("time {time} is not a multiple of the grid step {step}")]
    OffGrid { time: f64, step: f64 },

    #[error("semigroup has no inverse action")]
    NotInvertible,

    #[error("theta must be nonzero")]
    ZeroTheta,

    #[error("window half-width {0} is too small (need m >= 4)")]
    WindowTooSmall(usize),

    #[error("neither weight convention reproduces the decay identities")]
    NeitherConventionHolds,

    #[error("eigenvalue computation failed: {0}")]
    EigFailure(String),

    #[error("resolvent is singular at i*{0}")]
    SingularResolvent(f64),

    #[error("semigroup is not hyperbolic (gap {gap:.3e})")]
    NotHyperbolic { gap: f64 },

    #[error("pseudo-orbit is invalid: {0}")]
    InvalidPseudoOrbit(String),

    #[error("rate bound is not certified: {0}")]
    BoundNotCertified(String),

    #[error("time {time} outside [0, {end})")]
    OutOfRange { time: f64, end: f64 },

    #[error("parameters too small: {0}")]
    ParameterTooSmall(String),

    #[error("support reached the window boundary: {0}")]
    WindowExit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
