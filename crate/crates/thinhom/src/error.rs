use thiserror::Error;

use crate::regime::RegimeClass;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("unsupported regime (alpha = {alpha}, beta = {beta}): {reason}")]
    UnsupportedRegime {
        alpha: f64,
        beta: f64,
        reason: String,
    },

    #[error("regime {0} has no closed form; its coefficients come from a cell solve")]
    NeedsCellSolve(RegimeClass),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateElement { index: usize, area: f64 },

    #[error("non-positive Jacobian {det:e} in hexahedron {index}")]
    NonPositiveJacobian { index: usize, det: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("element budget exceeded: {required} elements required, {available} available ({detail})")]
    BudgetExceeded {
        required: u64,
        available: u64,
        detail: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-positive coefficient {value:e} sampled at ({x1}, {x2})")]
    NonPositiveCoefficient { value: f64, x1: f64, x2: f64 },

    #[error("unsupported corrector: {0}")]
    UnsupportedCorrector(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
