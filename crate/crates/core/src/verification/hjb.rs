use rayon::prelude::*;
use serde::Serialize;

use super::{l_beta, min_l_beta, Jet};
use crate::error::Result;
use crate::market::Market;
use crate::value_surface::{SurfaceSlice, ValueSurface};

/// A function `h(w, m)` to be checked against the verification conditions.
pub trait Candidate: Sync {
    fn market(&self) -> &Market;

    /// The mark below which the maximum is never pushed; `0` if there is
    /// no such range.
    fn critical_mark(&self) -> f64;

    /// `h(w, m)` for every `w` in `ws`.
    fn values(&self, m: f64, ws: &[f64]) -> Result<Vec<f64>>;

    /// The candidate's own feedback strategy, if it has one.
    fn strategies(&self, _m: f64, _ws: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

impl Candidate for ValueSurface {
    fn market(&self) -> &Market {
        ValueSurface::market(self)
    }

    fn critical_mark(&self) -> f64 {
        self.m_star()
    }

    fn values(&self, m: f64, ws: &[f64]) -> Result<Vec<f64>> {
        let s = self.slice(m)?;
        ws.iter().map(|&w| Ok(s.evaluate(w)?.phi)).collect()
    }

    fn strategies(&self, m: f64, ws: &[f64]) -> Result<Option<Vec<f64>>> {
        let s: SurfaceSlice = self.slice(m)?;
        ws.iter()
            .map(|&w| Ok(s.evaluate(w)?.pi_star))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// `h + A·exp(-((w - w₀)² + (m - m₀)²)/s²)`: a smooth bump that any sound
/// check must reject.
pub struct Perturbed<'a, C: Candidate> {
    pub inner: &'a C,
    pub amplitude: f64,
    pub center: (f64, f64),
    pub width: f64,
}

impl<'a, C: Candidate> Perturbed<'a, C> {
    /// A bump of height `amplitude` in the middle of the restricted range.
    pub fn centered(inner: &'a C, amplitude: f64) -> Self {
        let mk = inner.market();
        let m0 = 0.5 * inner.critical_mark().max(0.2 * mk.safe_level());
        let w0 = 0.5 * (1.0 + mk.alpha()) * m0;
        Self {
            inner,
            amplitude,
            center: (w0, m0),
            width: 0.02 * mk.safe_level(),
        }
    }

    fn bump(&self, w: f64, m: f64) -> f64 {
        let (dw, dm) = (w - self.center.0, m - self.center.1);
        self.amplitude * (-(dw * dw + dm * dm) / (self.width * self.width)).exp()
    }
}

impl<C: Candidate> Candidate for Perturbed<'_, C> {
    fn market(&self) -> &Market {
        self.inner.market()
    }

    fn critical_mark(&self) -> f64 {
        self.inner.critical_mark()
    }

    fn values(&self, m: f64, ws: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.inner.values(m, ws)?;
        for (h, &w) in v.iter_mut().zip(ws) {
            *h += self.bump(w, m);
        }
        Ok(v)
    }
}

/// A band of high-water marks to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRegion {
    /// `0 < m < m*`.
    Restricted,
    /// `m* < m < c/r`.
    FreeBoundary,
    /// `c/r ≤ m ≤ 2c/r`, capped so that `αm` stays below `c/r`.
    AboveSafe,
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbGrid {
    pub regions: Vec<GridRegion>,
    pub n_m: usize,
    pub n_w: usize,
    /// Finite-difference step in `w` and `m`, relative to `c/r`.
    pub step_rel: f64,
    /// Points closer than this to `w = m` or `w = c/r` are skipped, where
    /// `h_ww` is unbounded.
    pub edge_exclusion_rel: f64,
    /// Step for the diagonal derivative `h_m(m, m)`.
    pub diagonal_step_rel: f64,
    /// Tolerance on the HJB residuals.
    pub tol: f64,
    /// Tolerance on the diagonal derivative.
    pub diagonal_tol: f64,
}

impl Default for HjbGrid {
    fn default() -> Self {
        Self {
            regions: vec![GridRegion::Restricted, GridRegion::FreeBoundary],
            n_m: 200,
            n_w: 200,
            step_rel: 1e-5,
            edge_exclusion_rel: 1e-3,
            diagonal_step_rel: 1e-8,
            tol: 1e-5,
            diagonal_tol: 1e-4,
        }
    }
}

impl HjbGrid {
    fn marks(&self, region: GridRegion, m_star: f64, safe: f64, self_alpha: f64) -> Vec<f64> {
        let (lo, hi) = match region {
            GridRegion::Restricted => (0.0, m_star),
            GridRegion::FreeBoundary => (m_star, safe),
            GridRegion::AboveSafe => (safe, above_safe_limit(safe, self_alpha)),
        };
        if !(hi > lo) {
            return Vec::new();
        }
        let n = self.n_m;
        (0..n)
            .map(|j| match region {
                GridRegion::AboveSafe if n > 1 => lo + (hi - lo) * j as f64 / (n - 1) as f64,
                _ => lo + (hi - lo) * (j + 1) as f64 / (n + 1) as f64,
            })
            .collect()
    }
}

/// Largest mark sampled above the safe level: `2c/r`, or less when the
/// drawdown level `αm` would come close to `c/r`.
fn above_safe_limit(safe: f64, alpha: f64) -> f64 {
    if alpha > 0.0 {
        (2.0 * safe).min(0.9 * safe / alpha)
    } else {
        2.0 * safe
    }
}

/// One grid point of the HJB check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResidual {
    pub w: f64,
    pub m: f64,
    /// `min_β ℒ^β h`; absent where `h_ww ≤ 0`.
    pub residual: Option<f64>,
    pub beta_star: Option<f64>,
    /// `ℒ^π h` at the candidate's own strategy.
    pub at_strategy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub tolerance: f64,
    /// Largest violation measure found; the condition passes when it does
    /// not exceed `tolerance`.
    pub worst_violation: f64,
    pub location: Option<(f64, f64)>,
    pub pass: bool,
    pub checked: usize,
    pub note: Option<String>,
}

impl ConditionReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            worst_violation: f64::NEG_INFINITY,
            location: None,
            pass: true,
            checked: 0,
            note: None,
        }
    }

    fn record(&mut self, measure: f64, w: f64, m: f64) {
        self.checked += 1;
        // NaN counts as the worst possible violation.
        let measure = if measure.is_nan() { f64::INFINITY } else { measure };
        if measure > self.worst_violation {
            self.worst_violation = measure;
            self.location = Some((w, m));
        }
    }

    fn absorb(&mut self, other: &ConditionReport) {
        self.checked += other.checked;
        if other.worst_violation > self.worst_violation {
            self.worst_violation = other.worst_violation;
            self.location = other.location;
        }
    }

    fn finish(mut self) -> Self {
        if self.checked == 0 {
            self.worst_violation = 0.0;
        }
        self.pass = self.worst_violation <= self.tolerance;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbReport {
    pub grid: HjbGrid,
    pub conditions: Vec<ConditionReport>,
    /// Grid points with `h_ww ≤ 0`, excluded from the minimization.
    pub degenerate: usize,
    pub points: Vec<PointResidual>,
    pub pass: bool,
}

impl HjbReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// The report without the per-point residuals.
    pub fn summary(&self) -> HjbReport {
        HjbReport {
            points: Vec::new(),
            ..self.clone()
        }
    }
}

pub const MONOTONE_CONVEX: &str = "monotone_convex_in_w";
pub const BOUNDED_M_DERIVATIVES: &str = "bounded_m_derivatives";
pub const DIAGONAL: &str = "diagonal_m_derivative";
pub const DRAWDOWN_BOUNDARY: &str = "drawdown_boundary";
pub const SAFE_LEVEL: &str = "safe_level";
pub const HJB_INEQUALITY: &str = "hjb_inequality";
pub const HJB_EQUALITY: &str = "hjb_equality_at_strategy";

/// Bound on the one-sided `m`-derivatives.
const M_DERIVATIVE_BOUND: f64 = 1e3;

struct SliceOutcome {
    points: Vec<PointResidual>,
    conds: [ConditionReport; 5],
    degenerate: usize,
}

fn check_slice<C: Candidate>(c: &C, grid: &HjbGrid, m: f64) -> Result<SliceOutcome> {
    let mk = c.market();
    let safe = mk.safe_level();
    let step = grid.step_rel * safe;
    let edge = grid.edge_exclusion_rel * safe;
    let mut conds = [
        ConditionReport::new(MONOTONE_CONVEX, grid.tol),
        ConditionReport::new(BOUNDED_M_DERIVATIVES, M_DERIVATIVE_BOUND),
        ConditionReport::new(HJB_INEQUALITY, grid.tol),
        ConditionReport::new(HJB_EQUALITY, grid.tol),
        ConditionReport::new(DIAGONAL, grid.diagonal_tol),
    ];
    let lo = mk.alpha() * m + 2.0 * step;
    let hi = m.min(safe) - edge.max(2.0 * step);
    let ws: Vec<f64> = if hi > lo && grid.n_w > 1 {
        (0..grid.n_w)
            .map(|i| lo + (hi - lo) * i as f64 / (grid.n_w - 1) as f64)
            .collect()
    } else {
        Vec::new()
    };

    let mut stencil = Vec::with_capacity(3 * ws.len());
    for &w in &ws {
        stencil.extend([w - step, w, w + step]);
    }
    let vals = c.values(m, &stencil)?;
    let up = c.values(m + step, &ws)?;
    let down_ws: Vec<f64> = ws.iter().copied().filter(|&w| w <= m - step).collect();
    let down = c.values(m - step, &down_ws)?;
    let strategies = c.strategies(m, &ws)?;

    let mut points = Vec::with_capacity(ws.len());
    let mut degenerate = 0;
    let mut di = 0;
    for (i, &w) in ws.iter().enumerate() {
        let v = &vals[3 * i..3 * i + 3];
        let jet = Jet {
            h: v[1],
            h_w: (v[2] - v[0]) / (2.0 * step),
            h_ww: (v[2] - 2.0 * v[1] + v[0]) / (step * step),
        };
        conds[0].record(jet.h_w.max(-jet.h_ww), w, m);

        let mut dm = ((up[i] - v[1]) / step).abs();
        if w <= m - step {
            dm = dm.max(((v[1] - down[di]) / step).abs());
            di += 1;
        }
        conds[1].record(dm, w, m);

        let min = min_l_beta(mk, w, jet);
        match min {
            Some((r, _)) => conds[2].record(-r, w, m),
            None => {
                degenerate += 1;
                // Without curvature the infimum over β is -∞ unless h_w = 0.
                if jet.h_ww < -grid.tol || jet.h_w != 0.0 && jet.h_ww <= 0.0 {
                    conds[2].record(f64::INFINITY, w, m);
                }
            }
        }
        let at_strategy = strategies
            .as_ref()
            .map(|s| l_beta(mk, w, jet, s[i]));
        if let Some(r) = at_strategy {
            conds[3].record(r.abs(), w, m);
        }
        points.push(PointResidual {
            w,
            m,
            residual: min.map(|x| x.0),
            beta_star: min.map(|x| x.1),
            at_strategy,
        });
    }

    if m < safe {
        let d = grid.diagonal_step_rel * safe;
        let here = c.values(m, &[m])?[0];
        let right = c.values(m + d, &[m])?[0];
        let slope = (right - here) / d;
        if m > c.critical_mark() {
            conds[4].record(slope.abs(), m, m);
        } else {
            conds[4].record(-slope, m, m);
        }
    }
    Ok(SliceOutcome {
        points,
        conds,
        degenerate,
    })
}

/// Checks the verification conditions for `candidate` on `grid`.
///
/// Derivatives in `w` and `m` are central or one-sided differences of the
/// candidate's values, so the check treats the candidate as a black box.
/// Grid slices run in parallel; the report does not depend on the number
/// of workers.
pub fn check_conditions<C: Candidate>(candidate: &C, grid: &HjbGrid) -> Result<HjbReport> {
    let mk = candidate.market();
    let safe = mk.safe_level();
    let m_star = candidate.critical_mark();
    let marks: Vec<f64> = grid
        .regions
        .iter()
        .flat_map(|&r| grid.marks(r, m_star, safe, mk.alpha()))
        .collect();
    let slices: Vec<SliceOutcome> = marks
        .par_iter()
        .map(|&m| check_slice(candidate, grid, m))
        .collect::<Result<_>>()?;

    let mut conds = [
        ConditionReport::new(MONOTONE_CONVEX, grid.tol),
        ConditionReport::new(BOUNDED_M_DERIVATIVES, M_DERIVATIVE_BOUND),
        ConditionReport::new(DIAGONAL, grid.diagonal_tol),
        ConditionReport::new(DRAWDOWN_BOUNDARY, 1e-8),
        ConditionReport::new(SAFE_LEVEL, 1e-8),
        ConditionReport::new(HJB_INEQUALITY, grid.tol),
        ConditionReport::new(HJB_EQUALITY, grid.tol),
    ];
    let mut points = Vec::new();
    let mut degenerate = 0;
    for s in slices {
        conds[0].absorb(&s.conds[0]);
        conds[1].absorb(&s.conds[1]);
        conds[5].absorb(&s.conds[2]);
        conds[6].absorb(&s.conds[3]);
        conds[2].absorb(&s.conds[4]);
        degenerate += s.degenerate;
        points.extend(s.points);
    }

    for &m in &marks {
        let h = candidate.values(m, &[mk.alpha() * m])?[0];
        conds[3].record((h - 1.0).abs(), mk.alpha() * m, m);
    }
    let top = above_safe_limit(safe, mk.alpha());
    let above: Vec<f64> = [0.0, 0.1, 0.5, 1.0]
        .iter()
        .map(|f| safe + f * (top - safe))
        .collect();
    for m in marks.iter().copied().filter(|&m| m >= safe).chain(above) {
        let h = candidate.values(m, &[safe])?[0];
        conds[4].record(h.abs(), safe, m);
    }

    if !marks.iter().any(|&m| m < safe) {
        conds[2].note = Some("moot: every sampled mark is at or above c/r".into());
    }
    if conds[6].checked == 0 {
        conds[6].note = Some("candidate has no strategy of its own".into());
    }
    let conditions: Vec<ConditionReport> = conds.into_iter().map(ConditionReport::finish).collect();
    let pass = conditions.iter().all(|c| c.pass);
    Ok(HjbReport {
        grid: grid.clone(),
        conditions,
        degenerate,
        points,
        pass,
    })
}
