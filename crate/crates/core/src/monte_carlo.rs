//! Euler–Maruyama simulation of wealth under a feedback strategy, and a
//! Monte Carlo estimate of the drawdown probability.
//!
//! A path starts at `(w₀, m₀)` and steps
//! `W ← W + (rW + (μ - r)π - c)Δt + σπ√Δt·Z`, then `M ← max(M, W)`. It ends
//! at the first step with `W ≤ αM` (drawdown), at `W ≥ c/r` (drawdown is
//! then impossible), or at the horizon. Two estimators are available:
//!
//! * [`Estimator::Discounted`] scores `e^{-λτ}` for a drawdown at `τ` and
//!   never samples the death time.
//! * [`Estimator::Mortality`] draws an exponential death time per path,
//!   stops there, and scores `1` for a drawdown before death. Paths are
//!   much shorter when many of them never draw down.
//!
//! Each path owns two random streams derived from the master seed and its
//! index: one for the Brownian increments, one for everything else. Two
//! strategies run on the same path index therefore see identical increments.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_region::pi_ruin;
use crate::error::{Error, Result};
use crate::market::Market;
use crate::value_surface::ValueSurface;

/// A feedback map `(w, m) ↦ π`, the amount held in the risky asset.
pub trait Strategy: Sync {
    fn amount(&self, w: f64, m: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> Strategy for F {
    fn amount(&self, w: f64, m: f64) -> f64 {
        self(w, m)
    }
}

/// The strategy minimizing the probability of lifetime ruin.
pub struct RuinStrategy(pub Market);

impl Strategy for RuinStrategy {
    fn amount(&self, w: f64, _m: f64) -> f64 {
        pi_ruin(&self.0, w)
    }
}

/// `factor · inner`.
pub struct Scaled<S>(pub f64, pub S);

impl<S: Strategy> Strategy for Scaled<S> {
    fn amount(&self, w: f64, m: f64) -> f64 {
        self.0 * self.1.amount(w, m)
    }
}

/// `π*` sampled on a grid and interpolated bilinearly.
///
/// Rows are marks `m₀ = m_0 < … < m_n = c/r`; along each row the nodes are
/// spaced in `s = (w - αm)/(m - αm)` and clustered towards `s = 1`, where
/// `π*` has a square-root edge. Marks at or above `c/r` use the ruin strategy.
#[derive(Debug, Clone)]
pub struct TabulatedStrategy {
    market: Market,
    marks: Vec<f64>,
    s: Vec<f64>,
    /// `values[j * s.len() + i] = π*(w(s_i, m_j), m_j)`.
    values: Vec<f64>,
}

impl TabulatedStrategy {
    pub fn new(surface: &ValueSurface, m0: f64, n_m: usize, n_s: usize) -> Result<Self> {
        let mk = *surface.market();
        let safe = mk.safe_level();
        if !(m0 > 0.0 && m0 < safe) {
            return Err(Error::Domain {
                what: "m",
                value: m0,
                lo: 0.0,
                hi: safe,
            });
        }
        let (n_m, n_s) = (n_m.max(1), n_s.max(2));
        let marks: Vec<f64> = (0..=n_m)
            .map(|j| m0 + (safe - m0) * j as f64 / n_m as f64)
            .collect();
        let s: Vec<f64> = (0..n_s)
            .map(|i| {
                let t = 1.0 - i as f64 / (n_s - 1) as f64;
                1.0 - t * t
            })
            .collect();
        let rows: Vec<Vec<f64>> = marks
            .par_iter()
            .map(|&m| {
                let hi = m.min(safe);
                let lo = mk.alpha() * m;
                if m >= safe {
                    return Ok(s.iter().map(|&x| pi_ruin(&mk, lo + x * (hi - lo))).collect());
                }
                let slice = surface.slice(m)?;
                s.iter()
                    .map(|&x| Ok(slice.evaluate(lo + x * (hi - lo))?.pi_star))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            market: mk,
            marks,
            s,
            values: rows.concat(),
        })
    }

    fn row(&self, j: usize, x: f64) -> f64 {
        let n = self.s.len();
        let i = self.s.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (a, b) = (self.s[i - 1], self.s[i]);
        let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
        let r = &self.values[j * n..(j + 1) * n];
        r[i - 1] + t * (r[i] - r[i - 1])
    }
}

impl Strategy for TabulatedStrategy {
    fn amount(&self, w: f64, m: f64) -> f64 {
        let safe = self.market.safe_level();
        if m >= safe {
            return pi_ruin(&self.market, w);
        }
        let m = m.max(self.marks[0]);
        let n = self.marks.len();
        let j = self.marks.partition_point(|&v| v <= m).clamp(1, n - 1);
        let (ma, mb) = (self.marks[j - 1], self.marks[j]);
        let t = ((m - ma) / (mb - ma)).clamp(0.0, 1.0);
        let at = |k: usize, mk: f64| {
            let lo = self.market.alpha() * mk;
            let hi = mk.min(safe);
            self.row(k, ((w - lo) / (hi - lo)).clamp(0.0, 1.0))
        };
        (1.0 - t) * at(j - 1, ma) + t * at(j, mb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Discounted,
    Mortality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Euler step in years.
    pub dt: f64,
    /// Truncation time in years.
    pub horizon: f64,
    pub n_paths: u64,
    pub master_seed: u64,
    pub estimator: Estimator,
    /// Detect barrier crossings between grid times through the Brownian
    /// bridge.
    pub bridge: bool,
    /// Paths with `W ≥ (1 - safe_band)·c/r` count as safe.
    pub safe_band: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 5000.0,
            n_paths: 100_000,
            master_seed: 0x5eed,
            estimator: Estimator::Discounted,
            bridge: true,
            safe_band: 0.0,
        }
    }
}

impl SimConfig {
    /// Default settings with the horizon set to `200/λ`.
    pub fn for_market(market: &Market) -> Self {
        Self {
            horizon: 200.0 / market.params.lam,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid simulation setting: {what}")));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon >= self.dt) {
            return bad("horizon must be at least dt");
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1");
        }
        if !(0.0..1.0).contains(&self.safe_band) {
            return bad("safe_band must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub dt: f64,
    pub horizon: f64,
    /// Paths dropped because wealth became non-finite.
    pub aborted: u64,
    /// Paths that drew down before the horizon (and before death, for the
    /// mortality estimator).
    pub n_drawdown: u64,
    /// `e^{-λT}`: the most a path still alive at the horizon could add.
    pub truncation_bound: f64,
    /// Largest running maximum reached on any path.
    pub max_mark: f64,
}

/// Fraction of aborted paths above which a run fails.
pub const MAX_ABORTED_FRACTION: f64 = 1e-4;

const BLOCK: u64 = 1024;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn streams(seed: u64, index: u64) -> (Xoshiro256PlusPlus, Xoshiro256PlusPlus) {
    let key = splitmix(seed ^ splitmix(index));
    (
        Xoshiro256PlusPlus::seed_from_u64(key),
        Xoshiro256PlusPlus::seed_from_u64(splitmix(key ^ 0x6a09_e667_f3bc_c909)),
    )
}

enum Outcome {
    Score { value: f64, drawdown: bool, max_mark: f64 },
    Aborted,
}

fn run_path<S: Strategy + ?Sized>(
    market: &Market,
    strategy: &S,
    w0: f64,
    m0: f64,
    cfg: &SimConfig,
    index: u64,
) -> Outcome {
    let p = &market.params;
    let safe = market.safe_level();
    let top = safe * (1.0 - cfg.safe_band);
    let (mut w, mut m) = (w0, m0.max(w0));
    if w <= p.alpha * m {
        return Outcome::Score {
            value: 1.0,
            drawdown: true,
            max_mark: m,
        };
    }
    if w >= top {
        return Outcome::Score {
            value: 0.0,
            drawdown: false,
            max_mark: m,
        };
    }
    let (mut normals, mut aux) = streams(cfg.master_seed, index);
    let horizon = match cfg.estimator {
        Estimator::Discounted => cfg.horizon,
        Estimator::Mortality => {
            let u: f64 = aux.random();
            cfg.horizon.min(-(1.0 - u).ln() / p.lam)
        }
    };
    let steps = (horizon / cfg.dt).ceil() as u64;
    let sqdt = cfg.dt.sqrt();
    let excess = p.mu - p.r;
    for k in 1..=steps {
        let pi = strategy.amount(w, m);
        let z: f64 = normals.sample(StandardNormal);
        let vol = p.sigma * pi;
        let next = w + (p.r * w + excess * pi - p.c) * cfg.dt + vol * sqdt * z;
        if !next.is_finite() {
            return Outcome::Aborted;
        }
        let barrier = p.alpha * m;
        let mut hit = next <= barrier;
        if !hit && cfg.bridge && vol != 0.0 {
            // Probability that the bridge between the two grid values dipped
            // below the barrier.
            let x = 2.0 * (w - barrier) * (next - barrier) / (vol * vol * cfg.dt);
            hit = x < 40.0 && aux.random::<f64>() < (-x).exp();
        }
        if hit {
            let t = k as f64 * cfg.dt;
            let value = match cfg.estimator {
                Estimator::Discounted => (-p.lam * t).exp(),
                Estimator::Mortality => 1.0,
            };
            return Outcome::Score {
                value,
                drawdown: true,
                max_mark: m,
            };
        }
        w = next;
        m = m.max(w);
        if w >= top {
            break;
        }
    }
    Outcome::Score {
        value: 0.0,
        drawdown: false,
        max_mark: m,
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n: u64,
    /// Paths not aborted under any strategy; only these enter the sums.
    kept: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    /// Sums of squared differences from the first strategy.
    diff_sq: Vec<f64>,
    drawdowns: Vec<u64>,
    aborted: Vec<u64>,
    max_mark: Vec<f64>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            kept: 0,
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
            diff_sq: vec![0.0; k],
            drawdowns: vec![0; k],
            aborted: vec![0; k],
            max_mark: vec![f64::NEG_INFINITY; k],
        }
    }

    fn merge(mut self, o: &Tally) -> Self {
        self.n += o.n;
        self.kept += o.kept;
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
            self.diff_sq[i] += o.diff_sq[i];
            self.drawdowns[i] += o.drawdowns[i];
            self.aborted[i] += o.aborted[i];
            self.max_mark[i] = self.max_mark[i].max(o.max_mark[i]);
        }
        self
    }
}

fn check_start(market: &Market, w0: f64, m0: f64) -> Result<()> {
    let lo = market.alpha() * m0;
    if !(m0 > 0.0 && m0.is_finite() && w0 >= lo && w0 <= m0) {
        return Err(Error::Domain {
            what: "w",
            value: w0,
            lo,
            hi: m0,
        });
    }
    Ok(())
}

fn run<S: Strategy + ?Sized>(
    market: &Market,
    strategies: &[&S],
    w0: f64,
    m0: f64,
    cfg: &SimConfig,
) -> Result<Tally> {
    cfg.validate()?;
    check_start(market, w0, m0)?;
    let k = strategies.len();
    let blocks = cfg.n_paths.div_ceil(BLOCK);
    let tallies: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut t = Tally::new(k);
            let end = ((b + 1) * BLOCK).min(cfg.n_paths);
            let mut scores = vec![0.0; k];
            for index in b * BLOCK..end {
                t.n += 1;
                let mut ok = true;
                for (s, strategy) in strategies.iter().enumerate() {
                    match run_path(market, *strategy, w0, m0, cfg, index) {
                        Outcome::Score {
                            value,
                            drawdown,
                            max_mark,
                        } => {
                            scores[s] = value;
                            t.drawdowns[s] += u64::from(drawdown);
                            t.max_mark[s] = t.max_mark[s].max(max_mark);
                        }
                        Outcome::Aborted => {
                            t.aborted[s] += 1;
                            ok = false;
                        }
                    }
                }
                // A path aborted under any strategy is dropped for all of
                // them, so the comparison stays paired.
                if ok {
                    t.kept += 1;
                    for s in 0..k {
                        t.sum[s] += scores[s];
                        t.sum_sq[s] += scores[s] * scores[s];
                        let d = scores[s] - scores[0];
                        t.diff_sq[s] += d * d;
                    }
                }
            }
            t
        })
        .collect();
    let total = tallies.iter().fold(Tally::new(k), |acc, t| acc.merge(t));
    let aborted = total.aborted.iter().copied().max().unwrap_or(0);
    if aborted as f64 > MAX_ABORTED_FRACTION * cfg.n_paths as f64 {
        return Err(Error::Simulation {
            aborted,
            n_paths: cfg.n_paths,
        });
    }
    Ok(total)
}

fn summarize(market: &Market, t: &Tally, s: usize, cfg: &SimConfig) -> SimResult {
    let n = t.kept as f64;
    let mean = t.sum[s] / n;
    let var = if n > 1.0 {
        ((t.sum_sq[s] - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    SimResult {
        estimate: mean.clamp(0.0, 1.0),
        std_error: (var / n).sqrt(),
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        horizon: cfg.horizon,
        aborted: t.aborted[s],
        n_drawdown: t.drawdowns[s],
        truncation_bound: (-market.params.lam * cfg.horizon).exp(),
        max_mark: t.max_mark[s],
    }
}

/// Estimates `E[e^{-λτ}]` for a drawdown at `τ` from `(w0, m0)`.
pub fn simulate<S: Strategy + ?Sized>(
    market: &Market,
    strategy: &S,
    w0: f64,
    m0: f64,
    cfg: &SimConfig,
) -> Result<SimResult> {
    let t = run(market, &[strategy], w0, m0, cfg)?;
    Ok(summarize(market, &t, 0, cfg))
}

/// Difference between a strategy's estimate and the first strategy's, on
/// common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedDifference {
    pub name: String,
    /// `estimate - baseline estimate`.
    pub difference: f64,
    /// Standard error of the mean paired difference.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub results: Vec<(String, SimResult)>,
    /// Against the first strategy, for every other one.
    pub differences: Vec<PairedDifference>,
}

/// Runs every strategy on the same Brownian increments per path.
pub fn compare_strategies(
    market: &Market,
    w0: f64,
    m0: f64,
    strategies: &[(&str, &dyn Strategy)],
    cfg: &SimConfig,
) -> Result<Comparison> {
    if strategies.is_empty() {
        return Err(Error::Config("no strategies to compare".into()));
    }
    let refs: Vec<&dyn Strategy> = strategies.iter().map(|(_, s)| *s).collect();
    let t = run(market, &refs, w0, m0, cfg)?;
    let results: Vec<(String, SimResult)> = strategies
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (name.to_string(), summarize(market, &t, i, cfg)))
        .collect();
    let n = t.kept as f64;
    let differences = (1..strategies.len())
        .map(|s| {
            let mean = (t.sum[s] - t.sum[0]) / n;
            let var = ((t.diff_sq[s] - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
            PairedDifference {
                name: strategies[s].0.to_string(),
                difference: mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect();
    Ok(Comparison {
        results,
        differences,
    })
}
