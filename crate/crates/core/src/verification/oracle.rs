use serde::Serialize;

use crate::closed_region::pi_ruin;
use crate::error::{Error, Result};
use crate::market::Market;

/// Discrete value function of the restricted problem.
#[derive(Debug, Clone, Serialize)]
pub struct OracleSolution {
    pub m: f64,
    /// Nodes, increasing from `αm`.
    pub w: Vec<f64>,
    pub h: Vec<f64>,
    /// Feedback investment at each node.
    pub pi: Vec<f64>,
    pub iterations: usize,
}

impl OracleSolution {
    /// Linear interpolation between nodes.
    pub fn value_at(&self, w: f64) -> Result<f64> {
        let (lo, hi) = (self.w[0], *self.w.last().unwrap());
        if !(w >= lo && w <= hi) {
            return Err(Error::Domain {
                what: "w",
                value: w,
                lo,
                hi,
            });
        }
        let i = self.w.partition_point(|&x| x <= w).clamp(1, self.w.len() - 1);
        let (a, b) = (self.w[i - 1], self.w[i]);
        let t = (w - a) / (b - a);
        Ok(self.h[i - 1] + t * (self.h[i] - self.h[i - 1]))
    }
}

const MAX_ITERATIONS: usize = 200;
const VALUE_TOL: f64 = 1e-10;
/// Relative to the largest investment.
const POLICY_TOL: f64 = 1e-10;

/// Node `i` of `n` on `[lo, hi]`, clustered quadratically towards `hi`
/// where the value function loses smoothness.
fn node(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == n {
        return hi;
    }
    let s = 1.0 - i as f64 / n as f64;
    hi - (hi - lo) * s * s
}

/// Solves `λh = (rw - c)h_w + min_π [(μ - r)π h_w + ½σ²π² h_ww]` on
/// `[αm, min(m, c/r)]` with `h(αm) = 1`, by policy iteration on
/// `grid_size` nodes.
///
/// For `m < c/r` the top node `w = m` carries zero investment, so the drift
/// `rm - c < 0` points inward and a one-sided difference closes the system.
/// For `m ≥ c/r` the top node is `c/r` with `h = 0`.
///
/// Interior nodes use central differences wherever the scheme stays
/// monotone and upwind differences elsewhere. Each linear solve is
/// tridiagonal.
pub fn restricted_bvp_oracle(market: &Market, m: f64, grid_size: usize) -> Result<OracleSolution> {
    let p = &market.params;
    let safe = market.safe_level();
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain {
            what: "m",
            value: m,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if grid_size < 3 {
        return Err(Error::Config(format!("grid size {grid_size} < 3")));
    }
    let n = grid_size - 1;
    let lo = market.alpha() * m;
    let hi = m.min(safe);
    let reflecting = m < safe;
    let w: Vec<f64> = (0..=n).map(|i| node(lo, hi, i, n)).collect();
    let half_var = 0.5 * p.sigma * p.sigma;
    let excess = p.mu - p.r;

    let mut pi: Vec<f64> = w
        .iter()
        .map(|&x| pi_ruin(market, x) * ((hi - x) / (hi - lo)).sqrt())
        .collect();
    pi[n] = 0.0;
    let mut h = vec![0.0; n + 1];
    // Once a node needs upwinding it keeps it, so the scheme settles and
    // the iteration cannot cycle between two discretizations.
    let mut upwind = vec![false; n + 1];
    let mut previous_policy_change = f64::INFINITY;
    let (mut sub, mut diag, mut sup, mut rhs) =
        (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);

    for iteration in 1..=MAX_ITERATIONS {
        diag[0] = 1.0;
        rhs[0] = 1.0;
        for i in 1..n {
            let (dm, dp) = (w[i] - w[i - 1], w[i + 1] - w[i]);
            let a = half_var * pi[i] * pi[i];
            let b = p.r * w[i] + excess * pi[i] - p.c;
            let (d2m, d2p) = (2.0 / (dm * (dm + dp)), 2.0 / (dp * (dm + dp)));
            let (c1m, c1p) = (-dp / (dm * (dm + dp)), dm / (dp * (dm + dp)));
            let (mut l, mut u) = (a * d2m + b * c1m, a * d2p + b * c1p);
            upwind[i] |= l < 0.0 || u < 0.0;
            if upwind[i] {
                l = a * d2m + (-b).max(0.0) / dm;
                u = a * d2p + b.max(0.0) / dp;
            }
            sub[i] = l;
            sup[i] = u;
            diag[i] = -(l + u) - p.lam;
            rhs[i] = 0.0;
        }
        if reflecting {
            let b = p.r * w[n] - p.c;
            let d = w[n] - w[n - 1];
            sub[n] = -b / d;
            diag[n] = b / d - p.lam;
        } else {
            sub[n] = 0.0;
            diag[n] = 1.0;
        }
        rhs[n] = 0.0;
        let next = thomas(&sub, &diag, &sup, &rhs);

        let value_change = next
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        h = next;

        let mut policy_change: f64 = 0.0;
        let scale = pi.iter().fold(0.0, |a: f64, &b| a.max(b)).max(1e-300);
        for i in 1..n {
            let (dm, dp) = (w[i] - w[i - 1], w[i + 1] - w[i]);
            let hw = (-dp / (dm * (dm + dp))) * h[i - 1]
                + ((dp - dm) / (dm * dp)) * h[i]
                + (dm / (dp * (dm + dp))) * h[i + 1];
            let hww = 2.0 * (h[i - 1] / (dm * (dm + dp)) - h[i] / (dm * dp) + h[i + 1] / (dp * (dm + dp)));
            let next = if hww > 0.0 {
                (-p.merton_ratio() * hw / hww).max(0.0)
            } else {
                pi[i]
            };
            policy_change = policy_change.max((next - pi[i]).abs() / scale);
            pi[i] = next;
        }
        let last_policy_change = std::mem::replace(&mut previous_policy_change, policy_change);
        // Second differences on the finest cells carry round-off that grows
        // like the fourth power of the grid size, so on fine grids the policy
        // stops contracting before it reaches the tolerance. That plateau
        // counts as agreement once the values have settled.
        let settled = policy_change < POLICY_TOL
            || iteration > 2 && policy_change > 0.5 * last_policy_change;
        if value_change < VALUE_TOL && settled {
            return Ok(OracleSolution {
                m,
                w,
                h,
                pi,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "policy iteration",
        iterations: MAX_ITERATIONS,
    })
}

/// Solves a tridiagonal system; `sub[0]` and `sup[n-1]` are ignored.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_small_system() {
        let sub = [0.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let sup = [1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 3.0];
        let rhs = [4.0 * 1.0 - 2.0, 1.0 - 8.0 + 3.0, -2.0 + 12.0];
        let got = thomas(&sub, &diag, &sup, &rhs);
        for (a, b) in got.iter().zip(x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn nodes_cluster_at_the_top() {
        let w: Vec<f64> = (0..=10).map(|i| node(1.0, 2.0, i, 10)).collect();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[10], 2.0);
        assert!(w[10] - w[9] < w[1] - w[0]);
    }
}
