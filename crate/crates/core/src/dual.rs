//! The concave dual value `f(y) = K y + d₁ u^{B₁} + d₂ u^{B₂}`, `u = y/y_α`,
//! shared by both regimes below the safe level.
//!
//! For a fixed high-water mark `m`, every non-trivial regime solves the
//! same linear ODE `δy²f'' - (r-λ)yf' - λf + cy = 0` with the value-matching
//! and smooth-fit conditions `f(y_α) = 1 + αm y_α`, `f'(y_α) = αm` at the
//! upper boundary. Those two conditions pin the coefficients `d₁, d₂` given
//! `y_α`; the regimes differ only in how `y_α` (equivalently the ratio
//! `η = y_m / y_α`) is chosen. The primal value is the Legendre transform
//! `φ(w) = max_y (f(y) - w y)`.

use crate::error::{Error, Result};
use crate::market::Market;
use crate::roots::{brent, Tolerance};

/// Dual function for one high-water mark.
///
/// Stored as `f(y) = c/r·y + y_α (e₁ v^{B₁} + e₂ v^{B₂})` with `v = y/y_α`,
/// and every evaluation is carried out in the wealth gap `c/r - w`, which
/// keeps relative accuracy as `m` approaches the safe level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualFunction {
    pub m: f64,
    /// Upper boundary `y_α`, where the stopper stops.
    pub y_alpha: f64,
    /// Lower boundary `y_m = η·y_α`, where `f'(y_m) = m`.
    pub y_m: f64,
    alpha_m: f64,
    e1: f64,
    e2: f64,
    b1: f64,
    b2: f64,
    safe: f64,
}

/// `(e₁, e₂)` from the slope conditions `f'(y_α) = αm` and `f'(η y_α) = m`,
/// written with `u = c/r - m` and `ua = c/r - αm`.
fn scaled_coefficients(market: &Market, u: f64, ua: f64, eta: f64) -> (f64, f64) {
    let (b1, b2) = (market.k.b1, market.k.b2);
    let p1 = eta.powf(b1 - 1.0);
    let p2 = eta.powf(b2 - 1.0);
    let e2 = (p1 * ua - u) / (b2 * (p2 - p1));
    let e1 = -(ua + b2 * e2) / b1;
    (e1, e2)
}

impl DualFunction {
    /// Dual function with boundaries `y_α` and `η y_α` at high-water mark `m`.
    pub fn new(market: &Market, m: f64, y_alpha: f64, eta: f64) -> Self {
        Self::from_gap(market, market.safe_level() - m, y_alpha, eta)
    }

    /// [`DualFunction::new`] with `u = c/r - m` given directly.
    pub fn from_gap(market: &Market, u: f64, y_alpha: f64, eta: f64) -> Self {
        let safe = market.safe_level();
        let alpha = market.alpha();
        let m = safe - u;
        let ua = (1.0 - alpha) * safe + alpha * u;
        let (e1, e2) = scaled_coefficients(market, u, ua, eta);
        Self {
            m,
            y_alpha,
            y_m: eta * y_alpha,
            alpha_m: alpha * m,
            e1,
            e2,
            b1: market.k.b1,
            b2: market.k.b2,
            safe,
        }
    }

    /// `η = y_m / y_α`.
    pub fn eta(&self) -> f64 {
        self.y_m / self.y_alpha
    }

    fn tail(&self, y: f64) -> f64 {
        let v = y / self.y_alpha;
        self.y_alpha * (self.e1 * v.powf(self.b1) + self.e2 * v.powf(self.b2))
    }

    pub fn value(&self, y: f64) -> f64 {
        self.safe * y + self.tail(y)
    }

    /// `c/r - f'(y)`.
    pub fn dy_gap(&self, y: f64) -> f64 {
        let v = y / self.y_alpha;
        -(self.e1 * self.b1 * v.powf(self.b1 - 1.0) + self.e2 * self.b2 * v.powf(self.b2 - 1.0))
    }

    pub fn dy(&self, y: f64) -> f64 {
        self.safe - self.dy_gap(y)
    }

    pub fn dyy(&self, y: f64) -> f64 {
        let v = y / self.y_alpha;
        (self.e1 * self.b1 * (self.b1 - 1.0) * v.powf(self.b1 - 2.0)
            + self.e2 * self.b2 * (self.b2 - 1.0) * v.powf(self.b2 - 2.0))
            / self.y_alpha
    }

    /// Solves `f'(y) = w` on `[y_m, y_α]`.
    ///
    /// `f'` decreases from `m` to `αm` across the interval; wealth within
    /// [`CLAMP_REL`] of either end resolves to the matching endpoint.
    pub fn invert(&self, w: f64) -> Result<f64> {
        let slack = CLAMP_REL * self.m;
        if w > self.m + slack || w < self.alpha_m - slack || w.is_nan() {
            return Err(Error::Domain {
                what: "w",
                value: w,
                lo: self.alpha_m,
                hi: self.m,
            });
        }
        if w >= self.m {
            return Ok(self.y_m);
        }
        if w <= self.alpha_m {
            return Ok(self.y_alpha);
        }
        let target = self.safe - w;
        // Within round-off of an endpoint the residual may not change sign.
        if self.dy_gap(self.y_m) >= target {
            return Ok(self.y_m);
        }
        if self.dy_gap(self.y_alpha) <= target {
            return Ok(self.y_alpha);
        }
        brent(
            "dual inversion",
            |y| self.dy_gap(y) - target,
            self.y_m,
            self.y_alpha,
            Tolerance::rel(1e-14),
        )
    }

    /// Legendre transform at `w`, with the optimizing `y`.
    pub fn primal(&self, w: f64) -> Result<(f64, f64)> {
        let y = self.invert(w)?;
        Ok(((self.safe - w) * y + self.tail(y), y))
    }

    /// `-((μ-r)/σ²)·y·f''(y)`: the feedback amount in the risky asset.
    pub fn strategy_at(&self, market: &Market, y: f64) -> f64 {
        -market.params.merton_ratio() * y * self.dyy(y)
    }
}

/// Relative slack for points just outside the wealth interval.
pub const CLAMP_REL: f64 = 1e-12;

/// Upper boundary `y_α` for a given ratio `η ∈ (0, 1)`, from value matching
/// `f(y_α) = 1 + αm y_α` once the slope conditions fix the shape.
pub fn y_alpha_from_eta(market: &Market, m: f64, eta: f64) -> f64 {
    y_alpha_from_eta_gap(market, market.safe_level() - m, eta)
}

/// [`y_alpha_from_eta`] in terms of `u = c/r - m`.
pub fn y_alpha_from_eta_gap(market: &Market, u: f64, eta: f64) -> f64 {
    let alpha = market.alpha();
    let ua = (1.0 - alpha) * market.safe_level() + alpha * u;
    let (e1, e2) = scaled_coefficients(market, u, ua, eta);
    1.0 / (ua + e1 + e2)
}
