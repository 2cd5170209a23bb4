use rayon::prelude::*;
use serde::Serialize;

use crate::closed_region::pi_ruin;
use crate::error::Result;
use crate::value_surface::ValueSurface;

#[derive(Debug, Clone, Serialize)]
pub struct PropositionGrid {
    /// Wealth points per slice at fixed `m`.
    pub n_w: usize,
    /// Slices at fixed `m` per range.
    pub n_m: usize,
    /// Mark points per sweep at fixed `w`.
    pub n_sweep: usize,
    /// Sweeps at fixed `w` per range.
    pub n_fixed_w: usize,
    /// Distance kept from every boundary point, relative to `c/r`.
    pub offset_rel: f64,
}

impl Default for PropositionGrid {
    fn default() -> Self {
        Self {
            n_w: 1000,
            n_m: 10,
            n_sweep: 1000,
            n_fixed_w: 5,
            offset_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionCheck {
    pub name: String,
    /// Hard checks decide the overall verdict; soft ones are reported.
    pub hard: bool,
    /// Largest violation measure; the statement holds when it is below
    /// `tolerance` (strictly, for the strict inequalities with tolerance 0).
    pub worst: f64,
    pub tolerance: f64,
    pub location: Option<(f64, f64)>,
    pub checked: usize,
    pub pass: bool,
}

impl PropositionCheck {
    fn new(name: &str, hard: bool, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            hard,
            worst: f64::NEG_INFINITY,
            tolerance,
            location: None,
            checked: 0,
            pass: false,
        }
    }

    fn record(&mut self, measure: f64, w: f64, m: f64) {
        self.checked += 1;
        let measure = if measure.is_nan() { f64::INFINITY } else { measure };
        if measure > self.worst {
            self.worst = measure;
            self.location = Some((w, m));
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.checked > 0
            && if self.tolerance == 0.0 {
                self.worst < 0.0
            } else {
                self.worst <= self.tolerance
            };
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionReport {
    pub checks: Vec<PropositionCheck>,
    /// Smallest `pi_ruin(w) - π*(w, m)` over every sampled point with
    /// `m < c/r`.
    pub min_ruin_gap: f64,
    /// All hard checks pass.
    pub pass: bool,
}

impl PropositionReport {
    pub fn check(&self, name: &str) -> Option<&PropositionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const DECREASING_IN_W: &str = "pi_decreasing_in_w";
pub const ZERO_ON_DIAGONAL: &str = "pi_zero_on_diagonal";
pub const BELOW_RUIN: &str = "pi_below_ruin_strategy";
pub const GAP_INCREASING_IN_W: &str = "ruin_gap_increasing_in_w";
pub const INCREASING_IN_M: &str = "pi_increasing_in_m";
/// Suffix of the soft checks on `m* < m < c/r`.
pub const ABOVE_CRITICAL: &str = "_above_critical";

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Checks along `w` at fixed `m`: `(decreasing, below ruin, gap increasing)`.
fn w_slice(s: &ValueSurface, m: f64, grid: &PropositionGrid) -> Result<[(f64, f64, f64); 3]> {
    let mk = s.market();
    let off = grid.offset_rel * mk.safe_level();
    let slice = s.slice(m)?;
    let ws = linspace(mk.alpha() * m + off, m - off, grid.n_w);
    let mut worst = [(f64::NEG_INFINITY, 0.0, m); 3];
    let mut prev: Option<(f64, f64)> = None;
    for &w in &ws {
        let pi = slice.evaluate(w)?.pi_star;
        let gap = pi_ruin(mk, w) - pi;
        let mut bump = |k: usize, v: f64| {
            if v > worst[k].0 || v.is_nan() {
                worst[k] = (if v.is_nan() { f64::INFINITY } else { v }, w, m);
            }
        };
        bump(1, -gap);
        if let Some((p, g)) = prev {
            bump(0, pi - p);
            bump(2, g - gap);
        }
        prev = Some((pi, gap));
    }
    Ok(worst)
}

/// Largest `π*(w, m_j) - π*(w, m_{j+1})` along a sweep in `m`.
fn m_sweep(s: &ValueSurface, w: f64, lo: f64, hi: f64, n: usize) -> Result<(f64, f64, f64)> {
    let mut worst = (f64::NEG_INFINITY, w, lo);
    let mut prev: Option<f64> = None;
    for m in linspace(lo, hi, n) {
        let pi = s.pi_star(w, m)?;
        if let Some(p) = prev {
            let v = p - pi;
            if v > worst.0 || v.is_nan() {
                worst = (if v.is_nan() { f64::INFINITY } else { v }, w, m);
            }
        }
        prev = Some(pi);
    }
    Ok(worst)
}

/// Monotonicity of `π*` in `w` and `m`, and its position below the ruin
/// strategy.
///
/// Hard on `0 < m ≤ m*`, where the statements are theorems; soft on
/// `m* < m < c/r`, where they are only observed numerically.
pub fn proposition_suite(surface: &ValueSurface, grid: &PropositionGrid) -> Result<PropositionReport> {
    let mk = surface.market();
    let safe = mk.safe_level();
    let off = grid.offset_rel * safe;
    let ms = surface.m_star();
    let alpha = mk.alpha();
    let mut checks = Vec::new();
    let mut min_gap = f64::INFINITY;

    for hard in [true, false] {
        let suffix = if hard { "" } else { ABOVE_CRITICAL };
        let named = |n: &str| format!("{n}{suffix}");
        let (lo, hi) = if hard { (0.0, ms) } else { (ms, safe) };
        if !(hi - lo > 2.0 * off) {
            continue;
        }
        // The hard band includes m* itself. Near c/r the gap to the ruin
        // strategy falls below round-off, so the soft band stays interior.
        let marks: Vec<f64> = (1..=grid.n_m)
            .map(|j| {
                let n = if hard { grid.n_m } else { grid.n_m + 1 };
                lo + (hi - lo) * j as f64 / n as f64
            })
            .collect();
        let slices: Vec<[(f64, f64, f64); 3]> = marks
            .par_iter()
            .map(|&m| w_slice(surface, m, grid))
            .collect::<Result<_>>()?;
        let mut c = [
            PropositionCheck::new(&named(DECREASING_IN_W), hard, 0.0),
            PropositionCheck::new(&named(BELOW_RUIN), hard, 0.0),
            PropositionCheck::new(&named(GAP_INCREASING_IN_W), hard, 0.0),
        ];
        for s in &slices {
            for (k, (v, w, m)) in s.iter().enumerate() {
                // One record per slice stands for every comparison in it.
                let compared = if k == 1 { grid.n_w } else { grid.n_w - 1 };
                c[k].record(*v, *w, *m);
                c[k].checked += compared - 1;
            }
            min_gap = min_gap.min(-s[1].0);
        }
        checks.extend(c.into_iter().map(PropositionCheck::finish));

        if hard {
            let mut z = PropositionCheck::new(ZERO_ON_DIAGONAL, true, 1e-8);
            for &m in &marks {
                z.record(surface.pi_star(m, m)?.abs(), m, m);
            }
            checks.push(z.finish());
        }

        // Sweeps in m at fixed w keep αm ≤ w ≤ m inside the range.
        let w_lo = if hard { 0.0 } else { alpha * ms };
        let sweeps: Vec<(f64, f64, f64)> = (1..=grid.n_fixed_w)
            .map(|k| w_lo + (hi - w_lo) * k as f64 / (grid.n_fixed_w + 1) as f64)
            .collect::<Vec<_>>()
            .par_iter()
            .filter_map(|&w| {
                let a = w.max(lo) + off;
                let top = if hard { hi } else { hi - (hi - lo) / (grid.n_m + 1) as f64 };
                let b = if alpha > 0.0 { top.min(w / alpha) } else { top } - off;
                (b > a).then(|| m_sweep(surface, w, a, b, grid.n_sweep))
            })
            .collect::<Result<_>>()?;
        let mut inc = PropositionCheck::new(&named(INCREASING_IN_M), hard, 0.0);
        for (v, w, m) in sweeps {
            inc.checked += grid.n_sweep - 2;
            inc.record(v, w, m);
        }
        checks.push(inc.finish());
    }

    let pass = checks.iter().filter(|c| c.hard).all(|c| c.pass);
    Ok(PropositionReport {
        checks,
        min_ruin_gap: min_gap,
        pass,
    })
}
