//! Closed forms for a high-water mark at or above the safe level.
//!
//! When `m ≥ c/r` the maximum never moves under the optimal strategy, the
//! drawdown level `αm` acts as a fixed ruin level, and the value is
//! `((c/r - w)/(c/r - αm))^γ`. With `α = 0` this is the lifetime-ruin
//! probability.

use crate::error::{Error, Result};
use crate::market::Market;

/// Relative slack for evaluation points that overshoot the domain because
/// of root-finder round-off.
pub const CLAMP_REL: f64 = 1e-12;

/// Minimum drawdown probability for `m ≥ c/r` and `αm ≤ w ≤ c/r`.
pub fn phi_above_safe(market: &Market, w: f64, m: f64) -> Result<f64> {
    let safe = market.safe_level();
    let floor = market.alpha() * m;
    if !(m >= safe * (1.0 - CLAMP_REL)) {
        return Err(Error::Domain {
            what: "m",
            value: m,
            lo: safe,
            hi: f64::INFINITY,
        });
    }
    if !(w >= floor * (1.0 - CLAMP_REL) && w <= safe * (1.0 + CLAMP_REL)) {
        return Err(Error::Domain {
            what: "w",
            value: w,
            lo: floor,
            hi: safe,
        });
    }
    let w = w.clamp(floor, safe);
    let ratio = (safe - w) / (safe - floor);
    Ok(ratio.powf(market.k.gamma))
}

/// Feedback strategy minimizing the ruin probability; `0` at `c/r`.
///
/// Amount held in the risky asset, not a fraction of wealth.
#[inline]
pub fn pi_ruin(market: &Market, w: f64) -> f64 {
    let safe = market.safe_level();
    market.params.merton_ratio() / (market.k.gamma - 1.0) * (safe - w).max(0.0)
}

/// `∂φ/∂w` and `∂²φ/∂w²` of the closed form, analytic.
pub fn phi_above_safe_derivatives(market: &Market, w: f64, m: f64) -> (f64, f64) {
    let safe = market.safe_level();
    let span = safe - market.alpha() * m;
    let g = market.k.gamma;
    let x = ((safe - w) / span).max(0.0);
    let d1 = -g / span * x.powf(g - 1.0);
    let d2 = g * (g - 1.0) / (span * span) * x.powf(g - 2.0);
    (d1, d2)
}
