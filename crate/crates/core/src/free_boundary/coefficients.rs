//! Coefficients of the singular ODE `dz/dm = G(m, z)/H(m, z)` for the
//! ratio `z = ỹ_m/ỹ_{αm}` of the free boundaries.
//!
//! With `u = c/r - m`, `G = g₁(z)u + g₀(z)` and `H = h₂(z)u² + h₁(z)u + h₀(z)`.
//! Both forms are evaluated with Horner grouping in `u`.

use crate::market::Market;

/// Values of `g₀, g₁, h₀, h₁, h₂` at one `z ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeCoefficients {
    pub g0: f64,
    pub g1: f64,
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Relative size below which a numerator or denominator counts as zero.
pub const FORM_SWITCH_REL: f64 = 1e-14;

impl OdeCoefficients {
    pub fn at(market: &Market, z: f64) -> Self {
        let (b1, b2) = (market.k.b1, market.k.b2);
        let alpha = market.alpha();
        let safe = market.safe_level();
        let a1 = z.powf(b1 - 1.0);
        let a2 = z.powf(b2 - 1.0);
        let s = z.powf(b1 + b2 - 2.0);
        let spread = b1 - b2;
        let zz = z.powf(b2) - z.powf(b1);
        let mixed = (b2 - 1.0) * a1 - (b1 - 1.0) * a2;
        let q = spread + alpha * (b2 - 1.0) * a1 - alpha * (b1 - 1.0) * a2;
        let p = (b1 - 1.0) * a1 - (b2 - 1.0) * a2 - alpha * spread * s;
        Self {
            g0: (1.0 - alpha) * safe * zz * mixed,
            g1: zz * (q + alpha * (b1 - 1.0) * (b2 - 1.0) * (a1 - a2)),
            h0: -(1.0 - alpha).powi(2) * safe * safe * spread * s * mixed,
            h1: (1.0 - alpha) * safe * (mixed * p - spread * s * q),
            h2: p * q,
        }
    }

    /// `(G, scale)` where `scale` bounds the magnitude of the summands.
    pub fn numerator(&self, u: f64) -> (f64, f64) {
        (self.g1 * u + self.g0, (self.g1 * u).abs() + self.g0.abs())
    }

    pub fn denominator(&self, u: f64) -> (f64, f64) {
        let v = (self.h2 * u + self.h1) * u + self.h0;
        let scale = (self.h2 * u * u).abs() + (self.h1 * u).abs() + self.h0.abs();
        (v, scale)
    }
}

/// `G(m, z)`.
#[allow(non_snake_case)]
pub fn G(market: &Market, m: f64, z: f64) -> f64 {
    OdeCoefficients::at(market, z).numerator(market.safe_level() - m).0
}

/// `H(m, z)`.
#[allow(non_snake_case)]
pub fn H(market: &Market, m: f64, z: f64) -> f64 {
    OdeCoefficients::at(market, z).denominator(market.safe_level() - m).0
}

/// `dz/dm`, or `None` where `H` vanishes to working precision and the
/// Abel form should be used instead.
pub fn ode_rhs(market: &Market, m: f64, z: f64) -> Option<f64> {
    gap_rhs(market, market.safe_level() - m, z).map(|v| -v)
}

/// `dm/dz`, or `None` where `G` vanishes and the z-form should be used.
pub fn abel_rhs(market: &Market, z: f64, m: f64) -> Option<f64> {
    gap_abel_rhs(market, z, market.safe_level() - m).map(|v| -v)
}

/// `dz/du = -G/H` in terms of the gap `u = c/r - m`.
pub fn gap_rhs(market: &Market, u: f64, z: f64) -> Option<f64> {
    let c = OdeCoefficients::at(market, z);
    let (g, _) = c.numerator(u);
    let (h, scale) = c.denominator(u);
    if !(h.abs() > FORM_SWITCH_REL * scale) {
        return None;
    }
    let v = -g / h;
    v.is_finite().then_some(v)
}

/// `du/dz = -H/G`.
pub fn gap_abel_rhs(market: &Market, z: f64, u: f64) -> Option<f64> {
    let c = OdeCoefficients::at(market, z);
    let (g, scale) = c.numerator(u);
    let (h, _) = c.denominator(u);
    if !(g.abs() > FORM_SWITCH_REL * scale) {
        return None;
    }
    let v = -h / g;
    v.is_finite().then_some(v)
}

/// `ξ(z) = g₀(z)/g₁(z) + c/r`: the curve on which `G` vanishes.
pub fn xi(market: &Market, z: f64) -> f64 {
    let c = OdeCoefficients::at(market, z);
    c.g0 / c.g1 + market.safe_level()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller_stopper::{m_hat, solve_x};
    use crate::market::MarketParams;
    use proptest::prelude::*;

    fn markets() -> [Market; 2] {
        [
            Market::new(MarketParams::SET_1).unwrap(),
            Market::new(MarketParams::SET_2).unwrap(),
        ]
    }

    #[test]
    fn values_at_one() {
        for mk in markets() {
            let c = OdeCoefficients::at(&mk, 1.0);
            assert_eq!(c.g0, 0.0);
            assert_eq!(c.g1, 0.0);
            let spread = mk.k.b1 - mk.k.b2;
            let expect = ((1.0 - mk.alpha()) * mk.safe_level() * spread).powi(2);
            assert!((c.h0 - expect).abs() < 1e-12 * expect);
            // At m = 0 the lower edge is z = 1, so H(0, 1) = 0.
            let k = mk.safe_level();
            let h = (c.h2 * k + c.h1) * k + c.h0;
            assert!(h.abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn h_vanishes_on_the_lower_curve() {
        for mk in markets() {
            let safe = mk.safe_level();
            for i in 1..=100 {
                let m = safe * i as f64 / 101.0;
                let z = 1.0 / solve_x(&mk, m).unwrap();
                let c = OdeCoefficients::at(&mk, z);
                let (h, scale) = c.denominator(safe - m);
                assert!(h.abs() <= 1e-9 * scale, "m={m}: H={h}, scale={scale}");
                assert!(ode_rhs(&mk, m, z).map_or(true, |v| v.abs() > 1e3));
            }
        }
    }

    #[test]
    fn g_vanishes_on_xi_and_xi_stays_left_of_m_hat() {
        for mk in markets() {
            let mh = m_hat(&mk).unwrap();
            for i in 1..=100 {
                let z = i as f64 / 101.0;
                let m = xi(&mk, z);
                let (g, scale) = OdeCoefficients::at(&mk, z).numerator(mk.safe_level() - m);
                assert!(g.abs() <= 1e-9 * scale);
                assert!(m <= mh * (1.0 + 1e-12), "ξ({z}) = {m} > m̂ = {mh}");
            }
        }
    }

    #[test]
    fn xi_touches_m_hat_at_the_singular_point() {
        for mk in markets() {
            let mh = m_hat(&mk).unwrap();
            let zh = 1.0 / solve_x(&mk, mh).unwrap();
            assert!((xi(&mk, zh) - mh).abs() < 1e-8 * mk.safe_level());
        }
    }

    #[test]
    fn interior_point_reciprocal() {
        let mk = markets()[0];
        let a = ode_rhs(&mk, 20.0, 0.5).unwrap();
        let b = abel_rhs(&mk, 0.5, 20.0).unwrap();
        assert!((a * b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn abel_form_is_finite_on_the_lower_boundary() {
        for mk in markets() {
            let mh = m_hat(&mk).unwrap();
            let safe = mk.safe_level();
            for i in 1..10 {
                let m = mh + (safe - mh) * i as f64 / 10.0;
                let z = 1.0 / solve_x(&mk, m).unwrap();
                let v = abel_rhs(&mk, z, m).unwrap();
                assert!(v.abs() < 1e-6, "dm/dz = {v} at m = {m}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn reciprocal_identity(set in 0usize..2, t in 0.001f64..0.999, zt in 0.001f64..0.999) {
            let mk = markets()[set];
            let safe = mk.safe_level();
            let m = t * safe;
            let lo = 1.0 / solve_x(&mk, m).unwrap();
            let z = lo + (1.0 - lo) * zt;
            if let (Some(a), Some(b)) = (ode_rhs(&mk, m, z), abel_rhs(&mk, z, m)) {
                prop_assert!((a * b - 1.0).abs() <= 1e-10);
            }
        }
    }
}
