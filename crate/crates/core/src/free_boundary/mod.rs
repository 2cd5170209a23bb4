//! The free-boundary regime `m* ≤ m < c/r`.
//!
//! Here the dual boundaries are tied together by the ratio
//! `z(m) = ỹ_m(m)/ỹ_{αm}(m)`, which solves a first-order ODE that is
//! singular on the lower edge `z = 1/x(m)` of its natural domain `D₀` and
//! at the corner `(c/r, 0)`. The curve is found by integrating backward
//! from a small offset above the corner; where it meets the lower edge is
//! the critical high-water mark `m*`.

pub mod coefficients;
pub mod curve;
pub mod domain;
pub mod integrator;
pub mod shooting;

pub use coefficients::{abel_rhs, ode_rhs, xi, OdeCoefficients};
pub use curve::{CurveNode, FreeBoundaryCurve};
pub use domain::{DomainD0, Region};
pub use integrator::StepControl;
pub use coefficients::{gap_abel_rhs, gap_rhs};
pub use shooting::{
    comparison_from_lower, comparison_from_right, integrate_from_gap, shoot, Form, ShootConfig,
    Trajectory,
};
