use thiserror::Error;

use crate::manifold::Tangent;

/// Errors raised by the geometric and observer layers.
#[derive(Debug, Clone, Error)]
pub enum GeoError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point {0:?} is outside the chart domain")]
    OutsideDomain(Vec<f64>),

    #[error("degenerate metric (condition number {0:.3e})")]
    DegenerateMetric(f64),

    #[error("chart exit during geodesic integration")]
    ChartExit { last_valid: Box<Tangent> },

    #[error("exponential map did not settle below tolerance {tol:.1e} after {steps} steps")]
    ExpDivergence { steps: usize, tol: f64 },

    #[error("log divergence: no convergence after {iterations} Newton iterations (residual {residual:.3e})")]
    LogDivergence { iterations: usize, residual: f64 },

    #[error("injectivity violation: distance {distance:.6} >= injectivity radius {radius:.6}")]
    InjectivityViolation { distance: f64, radius: f64 },

    #[error("degenerate plane (Gram determinant {0:.3e})")]
    DegeneratePlane(f64),

    #[error("inadmissible region: E - U(q) = {0:.6e}")]
    InadmissibleRegion(f64),

    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),

    #[error("outside contraction region: {0}")]
    OutsideContractionRegion(String),

    #[error("trace too short: {got} samples, need at least {need}")]
    TraceTooShort { got: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl GeoError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        GeoError::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
