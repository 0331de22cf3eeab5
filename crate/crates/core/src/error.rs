//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("degenerate modulus: omega vanishes at {sigma} while the compared values differ")]
    DegenerateModulus { sigma: f64 },

    #[error("invalid weight: phi({sigma}) = {value} is not positive")]
    InvalidWeight { sigma: f64, value: f64 },

    #[error("epsilon schedule error: {reason}")]
    Schedule { reason: String },

    #[error("model error at t = {t}: m({argument}) = {value} < 0")]
    Model { t: f64, argument: f64, value: f64 },

    #[error("numerical divergence at t = {t}; last good time {t}")]
    Divergence { t: f64, partial: Box<crate::integrate::Trajectory> },

    #[error("singular denominator at s = {s}: d = {d} <= 0")]
    SingularDenominator { s: f64, d: f64 },

    #[error("degenerate data: |<A u0, u1>| + |psi''(0)/2| = {magnitude} below {tol}")]
    DegenerateData { magnitude: f64, tol: f64 },

    #[error("stationary data: |A^1/2 u(t)|^2 is constant on the sampled window")]
    StationaryData,

    #[error("non-integrable startup singularity: D1 = 0 and beta = {beta}")]
    NonIntegrableSingularity { beta: f64 },

    #[error("sample grids are not aligned: {reason}")]
    GridMismatch { reason: String },

    #[error("table error: {reason}")]
    Table { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
