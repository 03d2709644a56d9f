use alloc::boxed::Box;

use crate::dynamics::QuadState;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (max |A + Aᵀ| = {asymmetry:e})")]
    NotSkew { asymmetry: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is not a rotation (orthogonality defect {orthogonality:e}, det {det})")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("desired force violates the well-definedness condition ‖F_d‖ + F_d,3 > 0 (‖F_d‖ = {norm:e}, ‖F_d‖ + F_d,3 = {margin:e})")]
    Singularity { norm: f64, margin: f64 },

    #[error("controller singularity at t = {t}")]
    SimulationSingularity { t: f64, state: Box<QuadState> },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(&'static str),

    #[error("scenario invariant violated: {0}")]
    InvalidScenario(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),

    #[error("time {t} outside the curve domain [0, {total}]")]
    OutOfDomain { t: f64, total: f64 },

    #[error("rejection sampling exhausted after {0} draws")]
    SamplingExhausted(usize),

    #[error("internal invariant failed: {0}")]
    Internal(&'static str),
}
