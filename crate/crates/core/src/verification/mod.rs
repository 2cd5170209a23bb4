//! Independent checks of a candidate value function.
//!
//! * [`l_beta`] and [`min_l_beta`]: the controlled generator and its
//!   minimum over the investment amount.
//! * [`check_conditions`]: the verification conditions (monotonicity and
//!   convexity in `w`, bounded `m`-derivatives, the diagonal condition, the
//!   two boundary values, and the HJB inequality) on a grid.
//! * [`restricted_bvp_oracle`]: a finite-difference solver for the
//!   restricted problem, independent of the closed forms.
//! * [`proposition_suite`]: monotonicity properties of `π*`.

mod hjb;
mod oracle;
mod propositions;

pub use hjb::{
    check_conditions, Candidate, ConditionReport, GridRegion, HjbGrid, HjbReport, Perturbed,
    PointResidual, BOUNDED_M_DERIVATIVES, DIAGONAL, DRAWDOWN_BOUNDARY, HJB_EQUALITY,
    HJB_INEQUALITY, MONOTONE_CONVEX, SAFE_LEVEL,
};
pub use oracle::{restricted_bvp_oracle, OracleSolution};
pub use propositions::{
    proposition_suite, PropositionCheck, PropositionGrid, PropositionReport, ABOVE_CRITICAL,
    BELOW_RUIN, DECREASING_IN_W, GAP_INCREASING_IN_W, INCREASING_IN_M, ZERO_ON_DIAGONAL,
};

use crate::market::Market;

/// Value and first two wealth derivatives of a function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub h: f64,
    pub h_w: f64,
    pub h_ww: f64,
}

/// `ℒ^β h = (rw + (μ - r)β - c) h_w + ½σ²β² h_ww - λh`.
pub fn l_beta(market: &Market, w: f64, jet: Jet, beta: f64) -> f64 {
    let p = &market.params;
    (p.r * w + (p.mu - p.r) * beta - p.c) * jet.h_w + 0.5 * p.sigma * p.sigma * beta * beta * jet.h_ww
        - p.lam * jet.h
}

/// `(min_β ℒ^β h, β*)` with `β* = -((μ - r)/σ²) h_w/h_ww`, or `None` when
/// `h_ww ≤ 0` and the quadratic has no minimum.
pub fn min_l_beta(market: &Market, w: f64, jet: Jet) -> Option<(f64, f64)> {
    if !(jet.h_ww > 0.0) {
        return None;
    }
    let beta = -market.params.merton_ratio() * jet.h_w / jet.h_ww;
    Some((l_beta(market, w, jet, beta), beta))
}

/// Central differences of `f` at `w` with step `step`.
pub fn central_jet(f: impl Fn(f64) -> crate::Result<f64>, w: f64, step: f64) -> crate::Result<Jet> {
    let (lo, mid, hi) = (f(w - step)?, f(w)?, f(w + step)?);
    Ok(Jet {
        h: mid,
        h_w: (hi - lo) / (2.0 * step),
        h_ww: (hi - 2.0 * mid + lo) / (step * step),
    })
}
