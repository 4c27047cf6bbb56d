use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("hamiltonian of classical state {label} is not hermitian at t={t} (deviation {deviation:e})")]
    NonHermitianHamiltonian { label: usize, t: f64, deviation: f64 },

    #[error("diagonal coupling ({label},{label}) is not allowed")]
    DiagonalCoupling { label: usize },

    #[error("classical state index {index} out of range for m={m}")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("no coupling from classical state {from} to {to}")]
    MissingCoupling { from: usize, to: usize },

    #[error("jump rate vanishes in classical state {label}; no jump distribution exists")]
    ZeroRate { label: usize },

    #[error("propagation step rejected at t={t}: norm grew from {before:e} to {after:e}")]
    StepRejected { t: f64, before: f64, after: f64 },

    #[error("propagation step at t={t} rejected after {halvings} halvings")]
    RetryCapExceeded { t: f64, halvings: u32 },

    #[error("invalid jump distribution: {0}")]
    InvalidDistribution(String),

    #[error("post-jump state vanishes for jump {from} -> {to} at t={t}")]
    ZeroPostJumpNorm { from: usize, to: usize, t: f64 },

    #[error("trace drift {drift:e} at t={t} exceeds tolerance; retry with dt <= {suggested_dt:e}")]
    ToleranceBreach { t: f64, drift: f64, suggested_dt: f64 },

    #[error("hilbert space dimensions differ across classical states: {0:?}")]
    DimMismatch(Vec<usize>),

    #[error("time {t} outside trajectory span [{t_start}, {t_end}]")]
    HorizonExceeded { t: f64, t_start: f64, t_end: f64 },

    #[error("grid too coarse: width*dx^2 = {value} exceeds {limit}")]
    GridTooCoarse { value: f64, limit: f64 },

    #[error("time {t} is not a multiple of the grid spacing {dx}")]
    NonCommensurateTime { t: f64, dx: f64 },

    #[error("isometry U_{index} fails U^dagger U = I (deviation {deviation:e})")]
    NotIsometry { index: usize, deviation: f64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroRate { .. }
                | Error::StepRejected { .. }
                | Error::RetryCapExceeded { .. }
                | Error::InvalidDistribution(_)
                | Error::ZeroPostJumpNorm { .. }
                | Error::ToleranceBreach { .. }
        )
    }
}
