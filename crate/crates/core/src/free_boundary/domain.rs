//! The region `D₀ = {0 ≤ m ≤ c/r, 1/x(m) ≤ z ≤ 1}` and its boundary pieces.

use serde::Serialize;

use super::coefficients::{G, H};
use crate::controller_stopper::{m_hat, solve_x, solve_x_gap};
use crate::error::Result;
use crate::market::Market;

/// Radius, relative to `c/r`, of the neighbourhoods of the two singular
/// points where no slope is trusted.
pub const GUARD_REL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    /// `z = 1`.
    Upper,
    /// `z = 1/x(m)` with `m̂ < m ≤ c/r`.
    Lower,
    /// `m = c/r`, `0 < z < 1`.
    Right,
    /// `z = 1/x(m)` with `0 ≤ m ≤ m̂`.
    Left,
    /// Within the guard radius of `(m̂, 1/x(m̂))` or `(c/r, 0)`.
    Singular,
    Outside,
}

#[derive(Debug, Clone, Copy)]
pub struct DomainD0 {
    market: Market,
    pub m_hat: f64,
    /// `1/x(m̂)`.
    pub z_hat: f64,
    guard: f64,
    /// Boundary-membership tolerance, absolute in `z` and relative in `m`.
    pub tol: f64,
}

impl DomainD0 {
    pub fn new(market: &Market) -> Result<Self> {
        let m_hat = m_hat(market)?;
        Ok(Self {
            market: *market,
            m_hat,
            z_hat: 1.0 / solve_x(market, m_hat)?,
            guard: GUARD_REL * market.safe_level(),
            tol: 1e-10,
        })
    }

    /// `1/x(m)`, the lower edge of the region.
    pub fn lower_edge(&self, m: f64) -> Result<f64> {
        if m >= self.market.safe_level() {
            return Ok(0.0);
        }
        Ok(1.0 / solve_x(&self.market, m.max(0.0))?)
    }

    /// `1/x(c/r - u)`, accurate for small gaps `u`.
    pub fn lower_edge_gap(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 / solve_x_gap(&self.market, u.min(self.market.safe_level()))?)
    }

    pub fn contains(&self, m: f64, z: f64) -> Result<bool> {
        let safe = self.market.safe_level();
        if !(0.0..=safe).contains(&m) || !(0.0..=1.0).contains(&z) {
            return Ok(false);
        }
        Ok(z >= self.lower_edge(m)? - self.tol)
    }

    pub fn classify(&self, m: f64, z: f64) -> Result<Region> {
        let safe = self.market.safe_level();
        let near_hat = (m - self.m_hat).hypot(safe * (z - self.z_hat)) < self.guard;
        let near_corner = (safe - m).hypot(safe * z) < self.guard;
        if near_hat || near_corner {
            return Ok(Region::Singular);
        }
        if !self.contains(m, z)? {
            return Ok(Region::Outside);
        }
        let mt = self.tol * safe;
        if (m - safe).abs() <= mt {
            return Ok(if z >= 1.0 - self.tol {
                Region::Upper
            } else {
                Region::Right
            });
        }
        if z >= 1.0 - self.tol {
            return Ok(Region::Upper);
        }
        if (z - self.lower_edge(m)?).abs() <= self.tol {
            return Ok(if m > self.m_hat {
                Region::Lower
            } else {
                Region::Left
            });
        }
        Ok(Region::Interior)
    }

    /// Sign of `F = H/G`, the slope `dm/dz` of the Abel form; `0` on
    /// either zero set.
    pub fn sign_f(&self, m: f64, z: f64) -> f64 {
        let h = H(&self.market, m, z);
        let g = G(&self.market, m, z);
        if h == 0.0 || g == 0.0 {
            return 0.0;
        }
        (h * g).signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_boundary::coefficients::xi;
    use crate::market::MarketParams;

    fn domain() -> (Market, DomainD0) {
        let mk = Market::new(MarketParams::SET_1).unwrap();
        (mk, DomainD0::new(&mk).unwrap())
    }

    #[test]
    fn singular_points() {
        let (_, d) = domain();
        assert_eq!(d.classify(d.m_hat, d.z_hat).unwrap(), Region::Singular);
        assert_eq!(d.classify(25.0, 0.0).unwrap(), Region::Singular);
    }

    #[test]
    fn boundary_pieces() {
        let (mk, d) = domain();
        assert_eq!(d.classify(25.0, 0.5).unwrap(), Region::Right);
        assert_eq!(d.classify(10.0, 1.0).unwrap(), Region::Upper);
        let z = 1.0 / solve_x(&mk, 20.0).unwrap();
        assert_eq!(d.classify(20.0, z).unwrap(), Region::Lower);
        let z = 1.0 / solve_x(&mk, 5.0).unwrap();
        assert_eq!(d.classify(5.0, z).unwrap(), Region::Left);
        assert_eq!(d.classify(5.0, z * 0.9).unwrap(), Region::Outside);
        assert_eq!(d.classify(20.0, 0.8).unwrap(), Region::Interior);
    }

    #[test]
    fn h_sign_follows_the_lower_edge() {
        let (mk, d) = domain();
        for m in [3.0, 8.0, 18.0, 22.0] {
            let lo = d.lower_edge(m).unwrap();
            assert!(H(&mk, m, lo + 0.05) > 0.0);
            assert!(H(&mk, m, lo - 0.05) < 0.0);
        }
    }

    #[test]
    fn g_sign_flips_across_xi() {
        // G > 0 for m < ξ(z) and G < 0 for m > ξ(z).
        let (mk, d) = domain();
        for z in [0.5, 0.7, 0.9] {
            let x = xi(&mk, z);
            assert!(G(&mk, x - 0.5, z) > 0.0 && G(&mk, x + 0.5, z) < 0.0);
            assert!(x <= d.m_hat);
        }
    }

    #[test]
    fn sign_of_f_matches_direct_evaluation() {
        let (mk, d) = domain();
        let (m, z) = (20.0, 0.8);
        assert!(m > xi(&mk, z));
        let direct = (H(&mk, m, z) / G(&mk, m, z)).signum();
        assert_eq!(d.sign_f(m, z), direct);
        assert_eq!(d.sign_f(m, z), -1.0);
    }
}
