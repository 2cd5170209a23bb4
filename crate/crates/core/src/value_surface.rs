//! The minimum drawdown probability `φ(w, m)` and optimal investment
//! `π*(w, m)` over the whole domain `αm ≤ w ≤ min(m, c/r)`.
//!
//! | high-water mark      | regime          | value                                 |
//! |----------------------|-----------------|---------------------------------------|
//! | `m ≥ c/r`            | `AboveSafe`     | `((c/r - w)/(c/r - αm))^γ`            |
//! | `m* ≤ m < c/r`       | `FreeBoundary`  | Legendre transform, `η(m) = z(m)`     |
//! | `0 < m < m*`         | `Restricted`    | Legendre transform, `η(m) = 1/x(m)`   |

use std::fmt;

use serde::Serialize;

use crate::closed_region::{phi_above_safe, pi_ruin};
use crate::controller_stopper::RestrictedSlice;
use crate::dual::DualFunction;
use crate::error::{Error, Result};
use crate::free_boundary::{shoot, FreeBoundaryCurve, ShootConfig};
use crate::market::Market;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AboveSafe,
    FreeBoundary,
    Restricted,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::AboveSafe => "above_safe",
            Regime::FreeBoundary => "free_boundary",
            Regime::Restricted => "restricted",
        })
    }
}

/// Value, strategy, and dual variable at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub w: f64,
    pub m: f64,
    pub phi: f64,
    pub pi_star: f64,
    pub regime: Regime,
    /// `-φ_w`; absent in the closed-form regime.
    pub y: Option<f64>,
}

/// Evaluator over all three regimes. Immutable; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    market: Market,
    curve: FreeBoundaryCurve,
}

impl ValueSurface {
    pub fn new(market: &Market, curve: FreeBoundaryCurve) -> Self {
        Self {
            market: *market,
            curve,
        }
    }

    /// Shoots the free-boundary curve with default settings.
    pub fn build(market: &Market) -> Result<Self> {
        Ok(Self::new(market, shoot(market, &ShootConfig::default())?))
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn curve(&self) -> &FreeBoundaryCurve {
        &self.curve
    }

    pub fn m_star(&self) -> f64 {
        self.curve.m_star
    }

    pub fn regime(&self, m: f64) -> Regime {
        if m >= self.market.safe_level() {
            Regime::AboveSafe
        } else if m >= self.m_star() {
            Regime::FreeBoundary
        } else {
            Regime::Restricted
        }
    }

    fn check(&self, w: f64, m: f64) -> Result<()> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain {
                what: "m",
                value: m,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let lo = self.market.alpha() * m;
        let hi = m.min(self.market.safe_level());
        let slack = 1e-12 * self.market.safe_level();
        if !(w >= lo - slack && w <= hi + slack) {
            return Err(Error::Domain {
                what: "w",
                value: w,
                lo,
                hi,
            });
        }
        Ok(())
    }

    /// `η(m) = y_m/y_{αm}` on `(0, c/r)`.
    pub fn eta(&self, m: f64) -> Result<f64> {
        Ok(self.dual(m)?.eta())
    }

    /// The dual function for a high-water mark below the safe level.
    pub fn dual(&self, m: f64) -> Result<DualFunction> {
        match self.regime(m) {
            Regime::AboveSafe => Err(Error::Domain {
                what: "m",
                value: m,
                lo: 0.0,
                hi: self.market.safe_level(),
            }),
            Regime::Restricted => Ok(RestrictedSlice::new(&self.market, m)?.as_dual()),
            Regime::FreeBoundary => {
                let z = self.curve.z_at(m)?;
                let ya = self.curve.y_alpha_tilde(m)?;
                Ok(DualFunction::new(&self.market, m, ya, z))
            }
        }
    }

    pub fn evaluate(&self, w: f64, m: f64) -> Result<Evaluation> {
        self.check(w, m)?;
        self.slice(m)?.evaluate(w)
    }

    /// Everything that depends on `m` alone, for repeated evaluation along
    /// a wealth grid.
    pub fn slice(&self, m: f64) -> Result<SurfaceSlice> {
        self.check(self.market.alpha() * m, m)?;
        let kind = match self.regime(m) {
            Regime::AboveSafe => SliceKind::AboveSafe,
            Regime::Restricted => SliceKind::Restricted(RestrictedSlice::new(&self.market, m)?),
            Regime::FreeBoundary => SliceKind::FreeBoundary(self.dual(m)?),
        };
        Ok(SurfaceSlice {
            market: self.market,
            m,
            kind,
        })
    }

    pub fn phi(&self, w: f64, m: f64) -> Result<f64> {
        Ok(self.evaluate(w, m)?.phi)
    }

    pub fn pi_star(&self, w: f64, m: f64) -> Result<f64> {
        Ok(self.evaluate(w, m)?.pi_star)
    }

    /// The dual variable `y = -φ_w(w, m)` for `m < c/r`.
    pub fn invert_dual(&self, w: f64, m: f64) -> Result<f64> {
        self.check(w, m)?;
        match self.regime(m) {
            Regime::Restricted => RestrictedSlice::new(&self.market, m)?.y_star(w),
            _ => self.dual(m)?.invert(w),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum SliceKind {
    AboveSafe,
    Restricted(RestrictedSlice),
    FreeBoundary(DualFunction),
}

/// The surface at a fixed high-water mark.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSlice {
    market: Market,
    m: f64,
    kind: SliceKind,
}

impl SurfaceSlice {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn regime(&self) -> Regime {
        match self.kind {
            SliceKind::AboveSafe => Regime::AboveSafe,
            SliceKind::Restricted(_) => Regime::Restricted,
            SliceKind::FreeBoundary(_) => Regime::FreeBoundary,
        }
    }

    pub fn evaluate(&self, w: f64) -> Result<Evaluation> {
        let (phi, pi_star, y) = match &self.kind {
            SliceKind::AboveSafe => (
                phi_above_safe(&self.market, w, self.m)?,
                pi_ruin(&self.market, w),
                None,
            ),
            SliceKind::Restricted(s) => {
                let (v, y, pi) = s.evaluate(w)?;
                (v, pi, Some(y))
            }
            SliceKind::FreeBoundary(f) => {
                let (v, y) = f.primal(w)?;
                (v, f.strategy_at(&self.market, y), Some(y))
            }
        };
        Ok(Evaluation {
            w,
            m: self.m,
            phi: phi.clamp(0.0, 1.0),
            pi_star: pi_star.max(0.0),
            regime: self.regime(),
            y,
        })
    }
}
