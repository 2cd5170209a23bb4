//! The boundary-ratio curve `z(m)` on `[m*, c/r]` and the dual boundaries
//! derived from it.

use std::io::{self, Write};

use super::coefficients::{abel_rhs, ode_rhs, OdeCoefficients};
use super::domain::DomainD0;
use super::shooting::{Form, Trajectory};
use crate::dual::y_alpha_from_eta_gap;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::roots::{brent, Tolerance};

/// One integrator node with its numerator and denominator values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveNode {
    /// Gap `c/r - m`.
    pub u: f64,
    pub m: f64,
    pub z: f64,
    /// `G(m, z)`.
    pub g: f64,
    /// `H(m, z)`.
    pub h: f64,
    /// Formulation of the step that produced this node.
    pub form: Form,
}

impl CurveNode {
    pub fn new(market: &Market, m: f64, z: f64, form: Form) -> Self {
        let mut n = Self::from_gap(market, market.safe_level() - m, z, form);
        n.m = m;
        n
    }

    pub fn from_gap(market: &Market, u: f64, z: f64, form: Form) -> Self {
        let c = OdeCoefficients::at(market, z);
        Self {
            u,
            m: market.safe_level() - u,
            z,
            g: c.numerator(u).0,
            h: c.denominator(u).0,
            form,
        }
    }

    fn dz_du(&self) -> f64 {
        -self.g / self.h
    }

    fn du_dz(&self) -> f64 {
        -self.h / self.g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Shot,
    /// `α = 0`: `z(m) = (1 - m r/c)^{γ-1}` and `m* = 0`.
    RuinLimit,
}

/// Solution of the boundary-ratio ODE with `z(c/r) = 0`.
#[derive(Debug, Clone)]
pub struct FreeBoundaryCurve {
    market: Market,
    kind: Kind,
    /// Ascending in the gap `u`, so descending in `m`.
    nodes: Vec<CurveNode>,
    pub m_star: f64,
    pub m_hat: f64,
    /// `(ε, crossing)` for each terminal offset, in run order.
    pub sweep: Vec<(f64, f64)>,
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl FreeBoundaryCurve {
    pub(crate) fn from_trajectory(
        market: &Market,
        domain: &DomainD0,
        tr: Trajectory,
        m_star: f64,
        sweep: Vec<(f64, f64)>,
    ) -> Result<Self> {
        Ok(Self {
            market: *market,
            kind: Kind::Shot,
            nodes: tr.nodes,
            m_star,
            m_hat: domain.m_hat,
            sweep,
        })
    }

    pub(crate) fn ruin_limit(market: &Market) -> Self {
        let safe = market.safe_level();
        let n = 200;
        let nodes = (0..=n)
            .map(|i| {
                let u = safe * i as f64 / n as f64;
                CurveNode::from_gap(market, u, ruin_z_gap(market, u), Form::Z)
            })
            .collect();
        Self {
            market: *market,
            kind: Kind::RuinLimit,
            nodes,
            m_star: 0.0,
            m_hat: 0.0,
            sweep: Vec::new(),
        }
    }

    /// Nodes from the safe level down to the lower edge.
    pub fn nodes(&self) -> &[CurveNode] {
        &self.nodes
    }

    /// Crossing of the stored trajectory with the lower edge.
    pub fn m_first(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].m
    }

    /// True when the curve is the closed-form `α = 0` limit.
    pub fn is_ruin_limit(&self) -> bool {
        self.kind == Kind::RuinLimit
    }

    /// `z(m)` for `m* ≤ m ≤ c/r`.
    ///
    /// Between `m*` and the stored crossing (a gap of the size of the
    /// extrapolation correction) the lower edge `1/x(m)` is returned.
    pub fn z_at(&self, m: f64) -> Result<f64> {
        let safe = self.market.safe_level();
        let lo = self.m_star.min(self.m_first());
        let slack = 1e-12 * safe;
        if !(m >= lo - slack && m <= safe + slack) {
            return Err(Error::Domain {
                what: "m",
                value: m,
                lo,
                hi: safe,
            });
        }
        if self.kind == Kind::Shot && m <= self.m_first() {
            return Ok(1.0 / crate::controller_stopper::solve_x(&self.market, m)?);
        }
        self.z_at_gap((safe - m).max(0.0))
    }

    /// `z` at gap `u = c/r - m`.
    pub fn z_at_gap(&self, u: f64) -> Result<f64> {
        if self.kind == Kind::RuinLimit {
            return Ok(ruin_z_gap(&self.market, u));
        }
        if u <= 0.0 {
            return Ok(0.0);
        }
        let last = &self.nodes[self.nodes.len() - 1];
        if u > last.u {
            return Ok(1.0 / crate::controller_stopper::solve_x_gap(&self.market, u)?);
        }
        let i = self.nodes.partition_point(|n| n.u <= u);
        if i == 0 {
            return Ok(self.nodes[0].z);
        }
        if i >= self.nodes.len() {
            return Ok(last.z);
        }
        let (a, b) = (&self.nodes[i - 1], &self.nodes[i]);
        if u == a.u {
            return Ok(a.z);
        }
        self.interpolate(a, b, u)
    }

    fn interpolate(&self, a: &CurveNode, b: &CurveNode, u: f64) -> Result<f64> {
        let z_ok = a.dz_du().is_finite() && b.dz_du().is_finite();
        let u_ok = a.du_dz().is_finite() && b.du_dz().is_finite() && a.z != b.z;
        let use_abel = match b.form {
            Form::Abel => u_ok || !z_ok,
            Form::Z => !z_ok && u_ok,
        };
        if !use_abel && z_ok {
            return Ok(hermite(a.u, b.u, a.z, b.z, a.dz_du(), b.dz_du(), u));
        }
        if use_abel {
            let f = |z: f64| hermite(a.z, b.z, a.u, b.u, a.du_dz(), b.du_dz(), z) - u;
            let (lo, hi) = if a.z < b.z { (a.z, b.z) } else { (b.z, a.z) };
            return brent("curve inversion", f, lo, hi, Tolerance::rel(1e-15));
        }
        let s = (u - a.u) / (b.u - a.u);
        Ok(a.z + s * (b.z - a.z))
    }

    /// `η(m) = z(m)`, the ratio `ỹ_m/ỹ_{αm}`.
    pub fn eta(&self, m: f64) -> Result<f64> {
        self.z_at(m)
    }

    /// Upper dual boundary `ỹ_{αm}(m)` from `z(m)`.
    pub fn y_alpha_tilde(&self, m: f64) -> Result<f64> {
        let z = self.z_at(m)?;
        let u = (self.market.safe_level() - m).max(0.0);
        let y = y_alpha_from_eta_gap(&self.market, u, z);
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain {
                what: "upper dual boundary",
                value: y,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(y)
    }

    /// Lower dual boundary `ỹ_m(m) = z(m) ỹ_{αm}(m)`.
    pub fn y_m_tilde(&self, m: f64) -> Result<f64> {
        Ok(self.z_at(m)? * self.y_alpha_tilde(m)?)
    }

    /// `dz/dm` from the ODE at `m`, where the z-form is finite.
    pub fn slope(&self, m: f64) -> Result<Option<f64>> {
        let z = self.z_at(m)?;
        Ok(ode_rhs(&self.market, m, z))
    }

    /// `dm/dz` from the Abel form at `m`.
    pub fn abel_slope(&self, m: f64) -> Result<Option<f64>> {
        let z = self.z_at(m)?;
        Ok(abel_rhs(&self.market, z, m))
    }

    /// Writes `m,z,y_m,y_alpha_m` for every node, in ascending `m`, with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"m,z,y_m,y_alpha_m\n")?;
        for n in self.nodes.iter().rev() {
            let ya = y_alpha_from_eta_gap(&self.market, n.u, n.z);
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", n.m, n.z, n.z * ya, ya)?;
        }
        Ok(())
    }
}

fn ruin_z_gap(market: &Market, u: f64) -> f64 {
    (u / market.safe_level()).clamp(0.0, 1.0).powf(market.k.gamma - 1.0)
}
