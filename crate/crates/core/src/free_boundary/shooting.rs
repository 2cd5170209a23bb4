//! Backward integration of the boundary-ratio ODE with form switching.
//!
//! Integration runs in the gap `u = c/r - m`, which keeps full precision
//! next to the safe level, towards larger `u` (smaller `m`). Where
//! `|dz/du|` is moderate the integrator advances in `u`; where it is steep
//! it advances in `z` on the reciprocal (Abel) form. A trajectory ends when
//! it meets the lower edge `z = 1/x(m)`.

use serde::Serialize;

use super::coefficients::{gap_abel_rhs, gap_rhs, OdeCoefficients, FORM_SWITCH_REL};
use super::curve::{CurveNode, FreeBoundaryCurve};
use super::domain::{DomainD0, GUARD_REL};
use super::integrator::{dp45_step, Step, StepControl};
use crate::error::{Error, Result};
use crate::market::Market;

/// Which variable the integrator advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Independent variable `u`, unknown `z`.
    Z,
    /// Independent variable `z`, unknown `u`.
    Abel,
}

/// `|dz/du|` above which the Abel form takes over.
pub const SWITCH_SLOPE: f64 = 1e3;
/// Hysteresis factor around [`SWITCH_SLOPE`].
pub const HYSTERESIS: f64 = 2.0;

/// A backward trajectory and the point where it met the lower edge.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Visited points in integration order (increasing gap).
    pub nodes: Vec<CurveNode>,
    /// `(m, z)` where the trajectory met `z = 1/x(m)`.
    pub crossing: (f64, f64),
}

/// Settings for [`shoot`].
#[derive(Debug, Clone)]
pub struct ShootConfig {
    /// Terminal offsets `ε`, in decreasing order.
    pub eps_list: Vec<f64>,
    /// The stored curve is resolved down to this gap, relative to `c/r`.
    pub store_gap: f64,
    pub step: StepControl,
    /// Largest allowed difference between the crossings of the last two
    /// offsets, relative to `c/r`.
    pub sweep_tol: f64,
    /// Bisection tolerance for the crossing, relative to `c/r`.
    pub crossing_tol: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            store_gap: 1e-12,
            step: StepControl::default(),
            sweep_tol: 1e-4,
            crossing_tol: 1e-10,
        }
    }
}

/// `(G, H)`, with `H` set to zero where it vanishes to working precision.
fn gh(market: &Market, u: f64, z: f64) -> (f64, f64) {
    let c = OdeCoefficients::at(market, z);
    let (h, scale) = c.denominator(u);
    let h = if h.abs() <= FORM_SWITCH_REL * scale { 0.0 } else { h };
    (c.numerator(u).0, h)
}

/// Direction in `z` that makes `u` grow; into the region (`+1`) where
/// `du/dz` vanishes.
fn abel_direction(g: f64, h: f64) -> f64 {
    let slope = -h / g;
    if slope == 0.0 || !slope.is_finite() {
        1.0
    } else {
        slope.signum()
    }
}

fn attempt(market: &Market, form: Form, u: f64, z: f64, step: f64) -> Option<(Step, f64, f64)> {
    match form {
        Form::Z => {
            let mut f = |t: f64, y: f64| gap_rhs(market, t, y);
            let s = dp45_step(&mut f, u, z, step)?;
            Some((s, u + step, s.y))
        }
        Form::Abel => {
            let mut f = |t: f64, y: f64| gap_abel_rhs(market, t, y);
            let s = dp45_step(&mut f, z, u, step)?;
            Some((s, s.y, z + step))
        }
    }
}

/// Integrates from `(c/r - u0, z0)` towards smaller `m` until the
/// trajectory meets the lower edge at a gap of at least `event_from`.
pub fn integrate_from_gap(
    market: &Market,
    domain: &DomainD0,
    u0: f64,
    z0: f64,
    event_from: f64,
    ctl: &StepControl,
    crossing_tol: f64,
) -> Result<Trajectory> {
    let safe = market.safe_level();
    let guard = GUARD_REL * safe;
    let mut nodes = vec![CurveNode::from_gap(market, u0, z0, Form::Abel)];
    let fail = |reason: String, nodes: &[CurveNode]| Error::Shooting {
        reason,
        trajectory: nodes.iter().map(|n| (n.m, n.z)).collect(),
    };

    let (mut u, mut z) = (u0, z0);
    let (g, h) = gh(market, u, z);
    let mut form = if g.abs() > SWITCH_SLOPE * h.abs() {
        Form::Abel
    } else {
        Form::Z
    };
    let mut step = match form {
        Form::Z => 1e-6 * u.max(1e-6 * safe),
        Form::Abel => abel_direction(g, h) * 1e-3 * z,
    };

    for _ in 0..ctl.max_steps {
        let (g, h) = gh(market, u, z);
        if !(g.is_finite() && h.is_finite()) {
            return Err(fail(format!("coefficients overflow at z = {z}"), &nodes));
        }
        let steep = g.abs() / h.abs();
        match form {
            Form::Z if steep > SWITCH_SLOPE * HYSTERESIS => {
                form = Form::Abel;
                step = abel_direction(g, h) * (step.abs() * steep).min(ctl.h_max_z);
            }
            Form::Abel if steep < SWITCH_SLOPE / HYSTERESIS => {
                form = Form::Z;
                step = (step.abs() / steep).min(ctl.h_max_m);
            }
            Form::Abel => step = abel_direction(g, h) * step.abs(),
            Form::Z => {}
        }

        let Some((s, u1, z1)) = attempt(market, form, u, z, step) else {
            step *= 0.25;
            let scale = match form {
                Form::Z => u.max(f64::MIN_POSITIVE),
                Form::Abel => z,
            };
            if step.abs() < ctl.h_min * scale {
                form = match form {
                    Form::Z => Form::Abel,
                    Form::Abel => Form::Z,
                };
                step = match form {
                    Form::Z => 1e-9 * u.max(1e-9 * safe),
                    Form::Abel => abel_direction(g, h) * 1e-9 * z,
                };
            }
            continue;
        };
        let y0 = match form {
            Form::Z => z,
            Form::Abel => u,
        };
        let norm = ctl.norm(&s, y0);
        if norm > 1.0 {
            step = ctl.next_h(step, norm);
            continue;
        }

        if u1 >= event_from && z1 <= domain.lower_edge_gap(u1)? {
            let (uc, zc) = refine_crossing(market, domain, form, u, z, step, crossing_tol)?;
            // The curve meets the edge with a vertical tangent, so the
            // refined crossing may sit left of the last few nodes in u.
            while nodes.len() > 1 && nodes[nodes.len() - 1].u >= uc {
                nodes.pop();
            }
            nodes.push(CurveNode::from_gap(market, uc, zc, form));
            return Ok(Trajectory {
                nodes,
                crossing: (safe - uc, zc),
            });
        }
        if u1 < u {
            return Err(fail(
                format!("trajectory turned back at m = {}", safe - u),
                &nodes,
            ));
        }
        if u1 >= safe {
            return Err(fail("trajectory reached m = 0".into(), &nodes));
        }
        if z1 >= 1.0 {
            return Err(fail(
                format!("trajectory left through z = 1 at m = {}", safe - u1),
                &nodes,
            ));
        }
        let m1 = safe - u1;
        if (m1 - domain.m_hat).hypot(safe * (z1 - domain.z_hat)) < guard {
            return Err(fail(
                format!("trajectory entered the neighbourhood of the singular point at m = {m1}"),
                &nodes,
            ));
        }

        let node = CurveNode::from_gap(market, u1, z1, form);
        if u1 == u {
            // Below the resolution of u: the curve is vertical here.
            *nodes.last_mut().expect("start node") = node;
        } else {
            nodes.push(node);
        }
        u = u1;
        z = z1;
        let cap = match form {
            Form::Z => ctl.h_max_m,
            Form::Abel => ctl.h_max_z,
        };
        let next = ctl.next_h(step, norm);
        step = next.signum() * next.abs().min(cap);
    }
    Err(fail(format!("no crossing after {} steps", ctl.max_steps), &nodes))
}

/// Bisects the step fraction at which the trajectory meets the lower edge.
fn refine_crossing(
    market: &Market,
    domain: &DomainD0,
    form: Form,
    u: f64,
    z: f64,
    step: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let safe = market.safe_level();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = match attempt(market, form, u, z, step) {
        Some((_, u1, z1)) => (u1, z1),
        None => (u, z),
    };
    let du_dz = gap_abel_rhs(market, z, u).map_or(1.0, f64::abs);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let Some((_, u1, z1)) = attempt(market, form, u, z, step * mid) else {
            hi = mid;
            continue;
        };
        if z1 <= domain.lower_edge_gap(u1)? {
            hi = mid;
            best = (u1, z1);
        } else {
            lo = mid;
        }
        let span = match form {
            Form::Z => (step * (hi - lo)).abs(),
            Form::Abel => (step * (hi - lo)).abs() * du_dz,
        };
        if span < tol * safe {
            break;
        }
    }
    // Snap onto the edge so the crossing lies exactly on it.
    Ok((best.0, domain.lower_edge_gap(best.0)?))
}

/// Integrates from `(m0, z0)` towards smaller `m`; the lower edge counts
/// once `m ≤ event_from`.
pub fn integrate_backward(
    market: &Market,
    domain: &DomainD0,
    m0: f64,
    z0: f64,
    event_from: f64,
    ctl: &StepControl,
    crossing_tol: f64,
) -> Result<Trajectory> {
    let safe = market.safe_level();
    integrate_from_gap(
        market,
        domain,
        safe - m0,
        z0,
        safe - event_from,
        ctl,
        crossing_tol,
    )
}

/// Aitken's Δ² on three successive estimates, falling back to the last
/// estimate when the differences do not shrink geometrically.
pub fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d2 - d1;
    if denom == 0.0 || d1 == 0.0 || d2 == 0.0 || d2.signum() != d1.signum() || d2.abs() >= d1.abs()
    {
        return c;
    }
    c - d2 * d2 / denom
}

/// Shoots from `(c/r, ε)` for each `ε` and checks that the crossings
/// settle. One more trajectory, started far enough below the lower edge to
/// resolve `z(m)` next to the safe level, gives the stored curve and `m*`;
/// without it `m*` is extrapolated from the sweep.
pub fn shoot(market: &Market, config: &ShootConfig) -> Result<FreeBoundaryCurve> {
    if market.alpha() == 0.0 {
        return Ok(FreeBoundaryCurve::ruin_limit(market));
    }
    if config.eps_list.is_empty() {
        return Err(Error::Config("eps_list must not be empty".into()));
    }
    let safe = market.safe_level();
    let domain = DomainD0::new(market)?;
    let event_from = GUARD_REL * safe;
    let run = |eps: f64| {
        integrate_from_gap(
            market,
            &domain,
            0.0,
            eps,
            event_from,
            &config.step,
            config.crossing_tol,
        )
    };

    let mut sweep = Vec::with_capacity(config.eps_list.len() + 1);
    let mut last = None;
    for &eps in &config.eps_list {
        let tr = run(eps)?;
        sweep.push((eps, tr.crossing.0));
        last = Some(tr);
    }
    let n = sweep.len();
    if n >= 2 && (sweep[n - 1].1 - sweep[n - 2].1).abs() > config.sweep_tol * safe {
        return Err(Error::NoConvergence {
            what: "m* sweep over terminal offsets",
            iterations: n,
        });
    }
    let extrapolated = if n >= 3 {
        aitken(sweep[n - 3].1, sweep[n - 2].1, sweep[n - 1].1)
    } else {
        sweep[n - 1].1
    };

    // A run started far below every offset of the sweep is the ε → 0
    // limit itself; when it is available its crossing is m*.
    let eps_store = 1e-3 * domain.lower_edge_gap(config.store_gap * safe)?;
    let (tr, m_star) = if eps_store > 0.0 && eps_store < sweep[n - 1].0 {
        let tr = run(eps_store)?;
        let m = tr.crossing.0;
        (tr, m)
    } else {
        (last.expect("non-empty sweep"), extrapolated)
    };
    FreeBoundaryCurve::from_trajectory(market, &domain, tr, m_star, sweep)
}

/// Comparison trajectory through a point of the lower edge with `m0 > m̂`.
pub fn comparison_from_lower(market: &Market, m0: f64, ctl: &StepControl) -> Result<Trajectory> {
    let domain = DomainD0::new(market)?;
    let safe = market.safe_level();
    let u0 = safe - m0;
    let z0 = domain.lower_edge_gap(u0)?;
    integrate_from_gap(market, &domain, u0, z0, u0 + GUARD_REL * safe, ctl, 1e-10)
}

/// Comparison trajectory through `(c/r, z0)` on the right edge.
pub fn comparison_from_right(market: &Market, z0: f64, ctl: &StepControl) -> Result<Trajectory> {
    let domain = DomainD0::new(market)?;
    let safe = market.safe_level();
    integrate_from_gap(market, &domain, 0.0, z0, GUARD_REL * safe, ctl, 1e-10)
}
