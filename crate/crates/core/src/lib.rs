//! Numerical toolkit for the period function of the dehomogenized Loud
//! centers and the Dulac time of the associated saddle-node unfolding.
//!
//! The crate is organized around the objects it computes:
//!
//! * [`fields`] - the Loud vector field, its projective extension, the
//!   saddle-node normal form with its analytic factor U, and the polynomial
//!   algebra (sparse bivariate polynomials, Weierstrass split, binomial
//!   truncation of U).
//! * [`charts`] - the projective chart, the normalizing change Psi with its
//!   Jacobian and Newton inverse, first integrals, and the numerical
//!   conjugacy residual between the two presentations.
//! * [`integrator`] - the Dormand-Prince 5(4) engine with dense event
//!   detection, shared by every transit computation.
//! * [`dulac`] - Dulac time and map between {y = 1} and {x = 1}, the T0/T1
//!   decomposition, first-order coefficient extraction, and slope scans.
//! * [`period`] - the period function in affine coordinates, critical-period
//!   search, and the near-polycycle monotonicity check.
//! * [`verify`] - seeded verification sweeps shared by the CLI and the
//!   acceptance suite.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything is safe to use from parallel scans.

pub mod charts;
pub mod deriv;
pub mod dulac;
pub mod error;
pub mod fields;
pub mod integrator;
pub mod period;
pub mod quad;
pub mod verify;

pub use charts::{Chart, ChartPoint, SampleBox};
pub use deriv::DerivEstimate;
pub use dulac::{CoeffFit, DulacSample, ScanBounds, SlopeScan};
pub use error::{Error, Result};
pub use fields::{
    BivariatePoly, LoudParams, ParamBox, Unfolding, UnivariatePoly, USource, Vec2,
};
pub use integrator::{
    CrossingDirection, EventSpec, IntegratorConfig, Orbit, OrbitStatus, Path,
};
pub use period::{
    CriticalPeriod, ExtremumKind, MonotonicityReport, PeriodSample,
};
