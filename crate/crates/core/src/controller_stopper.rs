//! Closed-form dual machinery for high-water marks that the optimal
//! investor never lets grow.
//!
//! For fixed `m`, the dual value `φ̂(y, m)` of a monotone controller-stopper
//! game solves a linear second-order ODE between a reflecting boundary
//! `ŷ_m(m)` and a stopping boundary `ŷ_{αm}(m)`. Both boundaries are explicit
//! once the ratio `x(m) = ŷ_{αm}/ŷ_m` is known, and `x(m)` is the root of a
//! monotone scalar equation. The Legendre transform of `φ̂` is the minimum
//! drawdown probability `Φ(w, m)` among strategies that keep wealth below
//! `m`, and that is the unrestricted optimum whenever `m ≤ m*`.

use crate::dual::DualFunction;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::roots::{brent, expand_upper, Tolerance};

/// Reflecting and stopping boundaries of the dual game at one `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualBoundaries {
    pub y_m: f64,
    pub y_alpha_m: f64,
    /// `y_alpha_m / y_m`.
    pub x: f64,
}

/// Weights of the two power terms in the boundary-ratio equation.
fn weights(market: &Market) -> (f64, f64) {
    let (b1, b2) = (market.k.b1, market.k.b2);
    ((1.0 - b2) / (b1 - b2), (b1 - 1.0) / (b1 - b2))
}

/// `a v^{B₁-1} + b v^{B₂-1}`; equals 1 at `v = 1` and increases for `v > 1`.
fn ratio_poly(market: &Market, v: f64) -> f64 {
    let (a, b) = weights(market);
    a * v.powf(market.k.b1 - 1.0) + b * v.powf(market.k.b2 - 1.0)
}

/// The unique `x ≥ 1` with `(c/r - m)·P(x) = c/r - αm`.
pub fn solve_x(market: &Market, m: f64) -> Result<f64> {
    let safe = market.safe_level();
    if !(0.0..safe).contains(&m) {
        return Err(Error::Domain {
            what: "m",
            value: m,
            lo: 0.0,
            hi: safe,
        });
    }
    solve_x_gap(market, safe - m)
}

/// [`solve_x`] in terms of the gap `u = c/r - m > 0`, which keeps full
/// relative precision as `m → c/r`.
pub fn solve_x_gap(market: &Market, u: f64) -> Result<f64> {
    let safe = market.safe_level();
    if !(u > 0.0 && u <= safe) {
        return Err(Error::Domain {
            what: "c/r - m",
            value: u,
            lo: 0.0,
            hi: safe,
        });
    }
    let alpha = market.alpha();
    let target = ((1.0 - alpha) * safe + alpha * u) / u;
    if target <= 1.0 {
        return Ok(1.0);
    }
    let (a, b) = weights(market);
    let p = 1.0 / (market.k.b1 - 1.0);
    // For x ≥ 1 the second power lies in (0, 1], which pins the root
    // between these two values.
    let lo = ((target - b) / a).powf(p).max(1.0);
    let hi = (target / a).powf(p).max(lo);
    let f = |x: f64| ratio_poly(market, x) - target;
    let (lo, hi) = if f(lo) <= 0.0 && f(hi) >= 0.0 {
        (lo, hi)
    } else {
        expand_upper("x(m) bracket", f, 1.0, 2.0, 1100)?
    };
    brent("x(m)", f, lo, hi, Tolerance::rel(1e-14))
}

/// The increasing function whose zero is `m̂`.
pub fn m_hat_residual(market: &Market, m: f64) -> f64 {
    let (b1, b2) = (market.k.b1, market.k.b2);
    let alpha = market.alpha();
    let safe = market.safe_level();
    let t = safe * (1.0 - alpha) / (safe - m);
    (alpha * b1 + t).powf(1.0 / (b1 - 1.0)) - (alpha * b2 + t).powf(-1.0 / (1.0 - b2))
}

/// Lower end of the interval that contains `m̂`.
pub fn m_hat_lower_bound(market: &Market) -> f64 {
    let alpha = market.alpha();
    if alpha == 0.0 {
        return 0.0;
    }
    let safe = market.safe_level();
    (safe * (1.0 + (1.0 - alpha) / (alpha * market.k.b2))).max(0.0)
}

/// The mark `m̂` above which `ŷ_{αm}(m) > λ/(c(1-α))`.
///
/// For `α = 0` the residual vanishes at `m = 0` and `m̂ = 0`.
pub fn m_hat(market: &Market) -> Result<f64> {
    if market.alpha() == 0.0 {
        return Ok(0.0);
    }
    let safe = market.safe_level();
    let lo = m_hat_lower_bound(market) + 1e-9 * safe;
    let hi = safe * (1.0 - 1e-14);
    brent(
        "m_hat",
        |m| m_hat_residual(market, m),
        lo,
        hi,
        Tolerance::rel(1e-15),
    )
}

/// `ŷ_m(m)` and `ŷ_{αm}(m)` for `0 < m < c/r`.
pub fn y_boundaries(market: &Market, m: f64) -> Result<DualBoundaries> {
    let x = solve_x(market, m)?;
    Ok(boundaries_from_x(market, m, x))
}

fn boundaries_from_x(market: &Market, m: f64, x: f64) -> DualBoundaries {
    let (b1, b2) = (market.k.b1, market.k.b2);
    let safe = market.safe_level();
    // All terms are positive in this form, unlike the direct expression
    // in terms of c/r - αm.
    let inv = (safe - m) * (b1 - 1.0) * (1.0 - b2) / (b1 - b2)
        * (x.powf(b1 - 1.0) / b1 - x.powf(b2 - 1.0) / b2);
    let y_alpha_m = 1.0 / inv;
    DualBoundaries {
        y_m: y_alpha_m / x,
        y_alpha_m,
        x,
    }
}

/// `ŷ_{αm}` from its defining expression in terms of `c/r - αm`; kept as
/// an independent route for cross-checking [`y_boundaries`].
pub fn y_alpha_m_direct(market: &Market, m: f64, x: f64) -> f64 {
    let (b1, b2) = (market.k.b1, market.k.b2);
    let safe = market.safe_level();
    let inv = (safe - market.alpha() * m)
        - (safe - m)
            * ((1.0 - b2) / (b1 * (b1 - b2)) * x.powf(b1 - 1.0)
                + (b1 - 1.0) / (b2 * (b1 - b2)) * x.powf(b2 - 1.0));
    1.0 / inv
}

/// `λ/(c(1-α))`: the value of `ŷ_{αm}` at `m̂`.
pub fn y_alpha_threshold(market: &Market) -> f64 {
    market.params.lam / (market.params.c * (1.0 - market.alpha()))
}

/// Everything needed to evaluate the restricted problem at one `m`.
#[derive(Debug, Clone, Copy)]
pub struct RestrictedSlice {
    pub m: f64,
    pub bounds: DualBoundaries,
    market: Market,
}

impl RestrictedSlice {
    pub fn new(market: &Market, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Domain {
                what: "m",
                value: m,
                lo: 0.0,
                hi: market.safe_level(),
            });
        }
        let bounds = y_boundaries(market, m)?;
        Ok(Self {
            m,
            bounds,
            market: *market,
        })
    }

    fn check_y(&self, y: f64) -> Result<()> {
        let (lo, hi) = (self.bounds.y_m, self.bounds.y_alpha_m);
        let slack = 1e-12 * hi;
        if y < lo - slack || y > hi + slack || y.is_nan() {
            return Err(Error::Domain {
                what: "y",
                value: y,
                lo,
                hi,
            });
        }
        Ok(())
    }

    /// `φ̂(y, m)` on `[ŷ_m, ŷ_{αm}]`.
    pub fn phi_hat(&self, y: f64) -> Result<f64> {
        self.check_y(y)?;
        Ok(self.phi_hat_formula(y))
    }

    /// The closed form itself, without the interval check; it is an
    /// analytic function of `(y, m)` and extends past the boundaries.
    pub fn phi_hat_formula(&self, y: f64) -> f64 {
        let (b1, b2) = (self.market.k.b1, self.market.k.b2);
        let safe = self.market.safe_level();
        let ya = self.bounds.y_alpha_m;
        let gap = (safe - self.market.alpha() * self.m) * ya;
        let u = y / ya;
        safe * y - (b2 + gap * (1.0 - b2)) / (b1 - b2) * u.powf(b1)
            + (b1 - gap * (b1 - 1.0)) / (b1 - b2) * u.powf(b2)
    }

    /// `∂φ̂/∂y`, in terms of `v = y/ŷ_m`.
    pub fn phi_hat_y(&self, y: f64) -> Result<f64> {
        self.check_y(y)?;
        let safe = self.market.safe_level();
        let v = y / self.bounds.y_m;
        Ok(safe - (safe - self.m) * ratio_poly(&self.market, v))
    }

    /// `∂²φ̂/∂y²`; zero at `ŷ_m` and negative above it.
    pub fn phi_hat_yy(&self, y: f64) -> Result<f64> {
        self.check_y(y)?;
        let (b1, b2) = (self.market.k.b1, self.market.k.b2);
        let safe = self.market.safe_level();
        let ym = self.bounds.y_m;
        let v = y / ym;
        Ok(-(safe - self.m) * (b1 - 1.0) * (1.0 - b2) / ((b1 - b2) * ym)
            * (v.powf(b1 - 2.0) - v.powf(b2 - 2.0)))
    }

    /// `v = y*/ŷ_m ∈ [1, x(m)]` solving `φ̂_y(y*) = w`.
    fn invert_ratio(&self, w: f64) -> Result<f64> {
        let safe = self.market.safe_level();
        let floor = self.market.alpha() * self.m;
        let slack = crate::dual::CLAMP_REL * self.m;
        if w > self.m + slack || w < floor - slack || w.is_nan() {
            return Err(Error::Domain {
                what: "w",
                value: w,
                lo: floor,
                hi: self.m,
            });
        }
        if w >= self.m - slack {
            return Ok(1.0);
        }
        if w <= floor + slack {
            return Ok(self.bounds.x);
        }
        let target = (safe - w) / (safe - self.m);
        brent(
            "restricted dual inversion",
            |v| ratio_poly(&self.market, v) - target,
            1.0,
            self.bounds.x,
            Tolerance::rel(1e-14),
        )
    }

    /// The dual variable `y*(w, m) = -Φ_w(w, m)`.
    pub fn y_star(&self, w: f64) -> Result<f64> {
        Ok(self.invert_ratio(w)? * self.bounds.y_m)
    }

    /// `Φ(w, m) = max_y (φ̂(y, m) - w y)`.
    #[allow(non_snake_case)]
    pub fn Phi(&self, w: f64) -> Result<f64> {
        let y = self.y_star(w)?;
        let w = w.clamp(self.market.alpha() * self.m, self.m);
        let (b1, b2) = (self.market.k.b1, self.market.k.b2);
        let safe = self.market.safe_level();
        let ya = self.bounds.y_alpha_m;
        let gap = (safe - self.market.alpha() * self.m) * ya;
        let u = y / ya;
        Ok((safe - w) * y - (b2 + gap * (1.0 - b2)) / (b1 - b2) * u.powf(b1)
            + (b1 - gap * (b1 - 1.0)) / (b1 - b2) * u.powf(b2))
    }

    /// Restricted optimal amount in the risky asset; zero at `w = m`.
    pub fn pi_star(&self, w: f64) -> Result<f64> {
        let v = self.invert_ratio(w)?;
        Ok(self.pi_from_ratio(v))
    }

    fn pi_from_ratio(&self, v: f64) -> f64 {
        let (b1, b2) = (self.market.k.b1, self.market.k.b2);
        let safe = self.market.safe_level();
        self.market.params.merton_ratio() * (safe - self.m) * (b1 - 1.0) * (1.0 - b2) / (b1 - b2)
            * (v.powf(b1 - 1.0) - v.powf(b2 - 1.0))
    }

    /// `(Φ, y*, π*)` with a single inversion.
    pub fn evaluate(&self, w: f64) -> Result<(f64, f64, f64)> {
        let v = self.invert_ratio(w)?;
        let y = v * self.bounds.y_m;
        let (b1, b2) = (self.market.k.b1, self.market.k.b2);
        let safe = self.market.safe_level();
        let wc = w.clamp(self.market.alpha() * self.m, self.m);
        let ya = self.bounds.y_alpha_m;
        let gap = (safe - self.market.alpha() * self.m) * ya;
        let u = y / ya;
        let value = (safe - wc) * y - (b2 + gap * (1.0 - b2)) / (b1 - b2) * u.powf(b1)
            + (b1 - gap * (b1 - 1.0)) / (b1 - b2) * u.powf(b2);
        Ok((value, y, self.pi_from_ratio(v)))
    }

    /// The same slice expressed through the shared dual representation.
    pub fn as_dual(&self) -> DualFunction {
        DualFunction::new(
            &self.market,
            self.m,
            self.bounds.y_alpha_m,
            1.0 / self.bounds.x,
        )
    }
}

/// `Φ(w, m)` for `αm ≤ w ≤ m`, `0 < m < c/r`.
#[allow(non_snake_case)]
pub fn Phi(market: &Market, w: f64, m: f64) -> Result<f64> {
    RestrictedSlice::new(market, m)?.Phi(w)
}

/// Restricted optimal investment `π*(w, m)`.
pub fn pi_star_restricted(market: &Market, w: f64, m: f64) -> Result<f64> {
    RestrictedSlice::new(market, m)?.pi_star(w)
}

/// `Φ_m(m, m)` from the closed-form boundary derivative; nonnegative
/// exactly when `ŷ_{αm}(m) ≤ λ/(c(1-α))`.
pub fn phi_m_on_diagonal(market: &Market, m: f64) -> Result<f64> {
    let b = y_boundaries(market, m)?;
    let p = &market.params;
    let safe = market.safe_level();
    let dym = b.y_m / (safe - m) * (1.0 - b.y_alpha_m * safe * (1.0 - p.alpha));
    Ok((p.c - p.r * m) / p.lam * dym + (p.lam - p.r) / p.lam * b.y_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;

    fn set1() -> Market {
        Market::new(MarketParams::SET_1).unwrap()
    }

    fn x_residual(mk: &Market, m: f64, x: f64) -> f64 {
        let safe = mk.safe_level();
        let lhs = (safe - m) * ratio_poly(mk, x);
        (lhs - (safe - mk.alpha() * m)) / (safe - mk.alpha() * m)
    }

    #[test]
    fn x_at_zero_is_one() {
        assert_eq!(solve_x(&set1(), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn x_mid_value_and_residual() {
        let mk = set1();
        let x = solve_x(&mk, 12.5).unwrap();
        assert!((x - 1.432).abs() < 1e-3, "x(12.5) = {x}");
        assert!(x_residual(&mk, 12.5, x).abs() <= 1e-12);
    }

    #[test]
    fn x_increases_and_diverges() {
        let mk = set1();
        let safe = mk.safe_level();
        let mut prev = 1.0;
        for i in 1..200 {
            let m = safe * i as f64 / 200.0;
            let x = solve_x(&mk, m).unwrap();
            assert!(x > prev);
            assert!(x_residual(&mk, m, x).abs() <= 1e-12);
            prev = x;
        }
        let near = solve_x(&mk, safe * (1.0 - 1e-12)).unwrap();
        assert!(near > 1e4);
        assert!(solve_x(&mk, safe).is_err());
    }

    #[test]
    fn m_hat_properties() {
        for params in [MarketParams::SET_1, MarketParams::SET_2] {
            let mk = Market::new(params).unwrap();
            let safe = mk.safe_level();
            let mh = m_hat(&mk).unwrap();
            assert!(mh > m_hat_lower_bound(&mk) && mh < safe);
            // The residual has terms of order one near m̂.
            assert!(m_hat_residual(&mk, mh).abs() <= 1e-12);
            let lo = m_hat_lower_bound(&mk) + 1e-6 * safe;
            let mut prev = m_hat_residual(&mk, lo);
            for i in 1..100 {
                let m = lo + (safe * (1.0 - 1e-6) - lo) * i as f64 / 100.0;
                let g = m_hat_residual(&mk, m);
                assert!(g >= prev);
                prev = g;
            }
            let b = y_boundaries(&mk, mh).unwrap();
            assert!((b.y_alpha_m - y_alpha_threshold(&mk)).abs() < 1e-12);
            let lhs = b.x.powf(mk.k.b1 - 1.0);
            let rhs = mk.alpha() * mk.k.b1 + safe * (1.0 - mk.alpha()) / (safe - mh);
            assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
        assert!((y_alpha_threshold(&set1()) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn boundary_limits() {
        let mk = set1();
        let p = mk.params;
        // The approach to λ/c is like √m.
        let near0 = y_boundaries(&mk, 1e-14).unwrap();
        assert!((near0.y_alpha_m - p.lam / p.c).abs() < 1e-8);
        let safe = mk.safe_level();
        let b1 = mk.k.b1;
        let limit = p.r / (p.c * (1.0 - p.alpha)) * b1 / (b1 - 1.0);
        assert!((limit - 0.113723).abs() < 1e-6);
        let near = y_boundaries(&mk, safe * (1.0 - 1e-10)).unwrap();
        assert!((near.y_alpha_m - limit).abs() < 1e-6);
    }

    #[test]
    fn y_alpha_m_strictly_increasing_and_routes_agree() {
        let mk = set1();
        let safe = mk.safe_level();
        let mut prev = 0.0;
        for i in 1..1000 {
            let m = safe * i as f64 / 1000.0;
            let b = y_boundaries(&mk, m).unwrap();
            assert!(b.y_alpha_m > prev);
            assert!(b.y_m > 0.0 && b.y_m < b.y_alpha_m && b.x > 1.0);
            assert!((b.y_alpha_m - b.x * b.y_m).abs() <= 1e-12 * b.y_alpha_m);
            let direct = y_alpha_m_direct(&mk, m, b.x);
            assert!((direct - b.y_alpha_m).abs() < 1e-9 * b.y_alpha_m, "m = {m}");
            prev = b.y_alpha_m;
        }
    }

    #[test]
    fn free_boundary_conditions() {
        let mk = set1();
        for m in [2.0, 5.0, 10.0, 14.0] {
            let s = RestrictedSlice::new(&mk, m).unwrap();
            let (ym, ya) = (s.bounds.y_m, s.bounds.y_alpha_m);
            let am = mk.alpha() * m;
            assert!((s.phi_hat(ya).unwrap() - (1.0 + am * ya)).abs() < 1e-12);
            assert!((s.phi_hat_y(ya).unwrap() - am).abs() < 1e-11 * m);
            assert!((s.phi_hat_y(ym).unwrap() - m).abs() < 1e-12 * m);
            assert_eq!(s.phi_hat_yy(ym).unwrap(), 0.0);
            assert!(s.phi_hat(ym * 0.99).is_err());
        }
    }

    #[test]
    fn closed_form_derivatives_match_shared_representation() {
        let mk = set1();
        let s = RestrictedSlice::new(&mk, 8.0).unwrap();
        let d = s.as_dual();
        for i in 0..=10 {
            let y = s.bounds.y_m + (s.bounds.y_alpha_m - s.bounds.y_m) * i as f64 / 10.0;
            assert!((s.phi_hat(y).unwrap() - d.value(y)).abs() < 1e-12);
            assert!((s.phi_hat_y(y).unwrap() - d.dy(y)).abs() < 1e-10);
            let scale = d.dyy(s.bounds.y_alpha_m).abs();
            assert!((s.phi_hat_yy(y).unwrap() - d.dyy(y)).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn ode_residual_in_the_interior() {
        let mk = set1();
        let p = mk.params;
        let s = RestrictedSlice::new(&mk, 6.0).unwrap();
        for i in 1..20 {
            let y = s.bounds.y_m + (s.bounds.y_alpha_m - s.bounds.y_m) * i as f64 / 20.0;
            let terms = [
                mk.k.delta * y * y * s.phi_hat_yy(y).unwrap(),
                -(p.r - p.lam) * y * s.phi_hat_y(y).unwrap(),
                -p.lam * s.phi_hat(y).unwrap(),
                p.c * y,
            ];
            let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
            assert!(terms.iter().sum::<f64>().abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn dual_is_increasing_and_concave() {
        let mk = set1();
        let s = RestrictedSlice::new(&mk, 12.0).unwrap();
        let n = 500;
        let mut prev_v = f64::NEG_INFINITY;
        let mut prev_d = f64::INFINITY;
        for i in 0..=n {
            let y = s.bounds.y_m + (s.bounds.y_alpha_m - s.bounds.y_m) * i as f64 / n as f64;
            let v = s.phi_hat(y).unwrap();
            let d = s.phi_hat_y(y).unwrap();
            assert!(v > prev_v && d < prev_d);
            prev_v = v;
            prev_d = d;
        }
    }

    #[test]
    fn legendre_endpoints() {
        let mk = set1();
        let m = 5.0;
        let s = RestrictedSlice::new(&mk, m).unwrap();
        assert!((s.Phi(2.5).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(s.y_star(m).unwrap(), s.bounds.y_m);
        assert_eq!(s.pi_star(m).unwrap(), 0.0);
        assert!(s.Phi(5.0 + 1e-9).is_err());
        assert!(s.Phi(2.4).is_err());
    }

    #[test]
    fn legendre_consistency_and_strategy_identity() {
        let mk = set1();
        for m in [3.0, 5.0, 9.0, 13.0] {
            let s = RestrictedSlice::new(&mk, m).unwrap();
            let h = 1e-5 * mk.safe_level();
            let lo = mk.alpha() * m;
            for i in 1..10 {
                let w = lo + (m - lo) * i as f64 / 10.0;
                let f = |w| s.Phi(w).unwrap();
                let d1 = (f(w + h) - f(w - h)) / (2.0 * h);
                assert!((d1 + s.y_star(w).unwrap()).abs() <= 1e-6, "m={m} w={w}");
            }
        }
        // π* against -(μ-r)/σ²·Φ_w/Φ_ww by central differences.
        let s = RestrictedSlice::new(&mk, 5.0).unwrap();
        let w = 2.6;
        let h = 1e-4;
        let f = |w| s.Phi(w).unwrap();
        let d1 = (f(w + h) - f(w - h)) / (2.0 * h);
        let d2 = (f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h);
        let fd = -mk.params.merton_ratio() * d1 / d2;
        let pi = s.pi_star(w).unwrap();
        assert!(pi > 0.0);
        assert!((fd - pi).abs() <= 1e-5 * pi, "fd {fd} vs {pi}");
    }

    #[test]
    fn diagonal_m_derivative_sign_matches_threshold() {
        let mk = set1();
        let mh = m_hat(&mk).unwrap();
        let safe = mk.safe_level();
        for i in 1..100 {
            let m = safe * i as f64 / 100.0;
            let d = phi_m_on_diagonal(&mk, m).unwrap();
            let below = y_boundaries(&mk, m).unwrap().y_alpha_m <= y_alpha_threshold(&mk);
            assert_eq!(d >= 0.0, below, "m = {m}");
            assert_eq!(below, m <= mh, "m = {m}");
        }
    }

    #[test]
    fn diagonal_m_derivative_matches_finite_difference() {
        // Envelope: Φ_m(m, m) is φ̂_m at fixed y = ŷ_m.
        let mk = set1();
        for m in [4.0, 10.0, 14.0, 20.0] {
            let h = 1e-5;
            let y = y_boundaries(&mk, m).unwrap().y_m;
            let f = |mm: f64| RestrictedSlice::new(&mk, mm).unwrap().phi_hat_formula(y);
            let fd = (f(m + h) - f(m - h)) / (2.0 * h);
            let an = phi_m_on_diagonal(&mk, m).unwrap();
            assert!((fd - an).abs() < 1e-8, "m={m}: fd {fd} analytic {an}");
        }
    }
}
