//! Crate-wide error type and result alias.

use crate::integrator::OrbitStatus;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter (D, F) = ({d}, {f}) lies outside the admissible box {bounds}")]
    ParamOutsideBox { d: f64, f: f64, bounds: String },

    #[error("truncation degree {degree} is below the minimum {min}")]
    DegreeTooSmall { degree: u32, min: u32 },

    #[error("U(0,0) = {value} must be positive")]
    NonPositiveU0 { value: f64 },

    #[error("V({x}) = {value} is not confirmed positive on the domain")]
    NonPositiveV { x: f64, value: f64 },

    #[error("|eps| = {eps} must be below radius^mu = {bound}")]
    EpsOutOfRange { eps: f64, bound: f64 },

    #[error("invalid unfolding: {0}")]
    InvalidUnfolding(String),

    #[error("evaluation on the polar locus: {context}")]
    PolarLocus { context: &'static str },

    #[error("chart map is singular: {context}")]
    SingularChart { context: &'static str },

    #[error("domain violation ({context}): offending value {value}")]
    Domain { context: &'static str, value: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual})")]
    NewtonDidNotConverge { iterations: usize, residual: f64 },

    #[error("Jacobian is singular along the Newton path (det = {det})")]
    SingularJacobian { det: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("integration failed with status {status}")]
    Integration { status: OrbitStatus },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error}")]
    QuadratureDidNotConverge { estimate: f64, error: f64 },

    #[error("cross-check failed ({context}): {lhs} vs {rhs}, tolerance {tol}")]
    CrossCheckFailed {
        context: &'static str,
        lhs: f64,
        rhs: f64,
        tol: f64,
    },

    #[error("section parameter s = {s} is below the resolvable floor {floor}")]
    SectionBelowFloor { s: f64, floor: f64 },

    #[error("section parameter out of range: s = {s}, theta = {theta} requires s + theta < 1 and s > 0")]
    SectionOutOfRange { s: f64, theta: f64 },

    #[error("orbit through u0 = {u0} did not close (status {status})")]
    OrbitNotClosed { u0: f64, status: OrbitStatus },

    #[error("sign certificate failed inside bracket ({lo}, {hi})")]
    UnresolvedBracket { lo: f64, hi: f64 },

    #[error("non-finite value encountered: {context}")]
    NonFinite { context: &'static str },
}

impl Error {
    /// Short machine-readable code used in CSV status columns.
    pub fn status_code(&self) -> &'static str {
        match self {
            Error::ParamOutsideBox { .. } => "PARAM_OUTSIDE_BOX",
            Error::DegreeTooSmall { .. } => "DEGREE_TOO_SMALL",
            Error::NonPositiveU0 { .. } => "NONPOSITIVE_U0",
            Error::NonPositiveV { .. } => "NONPOSITIVE_V",
            Error::EpsOutOfRange { .. } => "EPS_OUT_OF_RANGE",
            Error::InvalidUnfolding(_) => "INVALID_UNFOLDING",
            Error::PolarLocus { .. } => "POLAR_LOCUS",
            Error::SingularChart { .. } => "SINGULAR_CHART",
            Error::Domain { .. } => "DOMAIN",
            Error::NewtonDidNotConverge { .. } => "NEWTON_NO_CONVERGENCE",
            Error::SingularJacobian { .. } => "SINGULAR_JACOBIAN",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Integration { status } => status.code(),
            Error::QuadratureDidNotConverge { .. } => "QUADRATURE_NO_CONVERGENCE",
            Error::CrossCheckFailed { .. } => "CROSS_CHECK_FAILED",
            Error::SectionBelowFloor { .. } => "S_BELOW_FLOOR",
            Error::SectionOutOfRange { .. } => "S_OUT_OF_RANGE",
            Error::OrbitNotClosed { .. } => "ORBIT_NOT_CLOSED",
            Error::UnresolvedBracket { .. } => "UNRESOLVED_BRACKET",
            Error::NonFinite { .. } => "NON_FINITE",
        }
    }
}
