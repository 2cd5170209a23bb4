//! Command implementations behind the `drawdown` binary.
//!
//! Each command returns a JSON value for standard output, or an error that
//! maps to an exit code through [`CliError::exit_code`].

pub mod config;
pub mod figures;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use drawdown::controller_stopper::Phi;
use drawdown::free_boundary::{shoot, FreeBoundaryCurve};
use drawdown::monte_carlo::{
    compare_strategies, simulate, RuinStrategy, Scaled, SimConfig, TabulatedStrategy,
};
use drawdown::value_surface::ValueSurface;
use drawdown::verification::{
    check_conditions, proposition_suite, restricted_bvp_oracle, GridRegion, HjbGrid, Perturbed,
    PropositionGrid,
};
use drawdown::{Error, Market};

use config::RunConfig;

pub const EXIT_ASSERTION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration, or files.
    Usage(String),
    /// A hard check failed; the report is printed before exiting.
    Assertion(Value),
    Solver(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Assertion(_) => EXIT_ASSERTION,
            CliError::Solver(e) => match e {
                Error::InvalidParameter { .. } | Error::Domain { .. } | Error::Config(_) => {
                    EXIT_USAGE
                }
                Error::NoConvergence { .. }
                | Error::Bracket { .. }
                | Error::Shooting { .. }
                | Error::Simulation { .. } => EXIT_NO_CONVERGENCE,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Assertion(_) => f.write_str("hard assertion failed"),
            CliError::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Solver(e)
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn market(cfg: &RunConfig) -> Result<Market, CliError> {
    Ok(Market::new(cfg.params)?)
}

fn curve(cfg: &RunConfig, mk: &Market) -> Result<FreeBoundaryCurve, CliError> {
    match shoot(mk, &cfg.solver.shoot_config()) {
        Err(Error::Shooting { reason, trajectory }) => {
            let path = cfg.output.join("shooting_trajectory.csv");
            let mut t = String::from("m,z\n");
            for (m, z) in &trajectory {
                t.push_str(&format!("{},{}\n", figures::num(*m), figures::num(*z)));
            }
            if fs::create_dir_all(&cfg.output).and_then(|_| fs::write(&path, t)).is_ok() {
                eprintln!("trajectory written to {}", path.display());
            }
            Err(Error::Shooting { reason, trajectory }.into())
        }
        r => Ok(r?),
    }
}

pub fn surface(cfg: &RunConfig) -> Result<ValueSurface, CliError> {
    let mk = market(cfg)?;
    let c = curve(cfg, &mk)?;
    Ok(ValueSurface::new(&mk, c))
}

pub fn cmd_constants(cfg: &RunConfig) -> Result<Value, CliError> {
    let mk = market(cfg)?;
    Ok(serde_json::to_value(mk.k).expect("constants serialize"))
}

pub const RUIN_LIMIT_MESSAGE: &str = "free-boundary regime empty, ruin closed form applies";

/// `m*`, `m̂`, the offset sweep, and the curve file.
pub fn cmd_mstar(cfg: &RunConfig, curve_file: Option<&Path>) -> Result<Value, CliError> {
    let mk = market(cfg)?;
    if mk.alpha() == 0.0 {
        return Ok(json!({ "m_star": 0.0, "message": RUIN_LIMIT_MESSAGE }));
    }
    let c = curve(cfg, &mk)?;
    let path = curve_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output.join("free_boundary_curve.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    c.write_csv(std::io::BufWriter::new(file))
        .map_err(|e| io_error(&path, e))?;
    let sweep: Vec<Value> = c
        .sweep
        .iter()
        .map(|(eps, m)| json!({ "eps": eps, "m_star": m }))
        .collect();
    let report = json!({
        "m_star": c.m_star,
        "m_hat": c.m_hat,
        "safe_level": mk.safe_level(),
        "sweep": sweep,
        "curve_file": path,
    });
    if !(c.m_star > 0.0 && c.m_star < c.m_hat && c.m_hat < mk.safe_level()) {
        return Err(CliError::Assertion(report));
    }
    Ok(report)
}

pub fn cmd_eval(cfg: &RunConfig, w: f64, m: f64) -> Result<Value, CliError> {
    let s = surface(cfg)?;
    Ok(serde_json::to_value(s.evaluate(w, m)?).expect("evaluation serializes"))
}

/// Writes the requested figure files and returns their paths.
pub fn cmd_figures(cfg: &RunConfig, which: &[u8]) -> Result<Value, CliError> {
    let s = surface(cfg)?;
    fs::create_dir_all(&cfg.output).map_err(|e| io_error(&cfg.output, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for &k in which {
        let table = figures::figure(&s, k)?;
        let path = cfg.output.join(figures::file_name(k));
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        table
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| io_error(&path, e))?;
        files.push(path);
    }
    Ok(json!({ "files": files }))
}

#[derive(Debug, Serialize)]
struct OracleCheck {
    m: f64,
    error_coarse: f64,
    error_fine: f64,
    order: f64,
    pass: bool,
}

fn oracle_checks(cfg: &RunConfig, s: &ValueSurface) -> Result<Vec<OracleCheck>, CliError> {
    let mk = s.market();
    let v = &cfg.verify;
    let top = if s.m_star() > 0.0 { s.m_star() } else { return Ok(Vec::new()) };
    (1..=v.oracle_marks)
        .map(|j| {
            let m = top * j as f64 / (v.oracle_marks + 1) as f64;
            let err = |n: usize| -> Result<f64, CliError> {
                let sol = restricted_bvp_oracle(mk, m, n)?;
                sol.w.iter().zip(&sol.h).try_fold(0.0f64, |acc, (&w, &h)| {
                    Ok(acc.max((h - Phi(mk, w, m)?).abs()))
                })
            };
            let (coarse, fine) = (err(v.oracle_nodes / 2)?, err(v.oracle_nodes)?);
            let order = (coarse / fine).log2();
            Ok(OracleCheck {
                m,
                error_coarse: coarse,
                error_fine: fine,
                order,
                pass: fine <= v.oracle_tol && (order >= v.oracle_min_order || fine < 1e-12),
            })
        })
        .collect()
}

/// Runs the verification conditions, the monotonicity suite, and the
/// oracle comparison. With `perturb`, the conditions are checked on the
/// surface plus a bump of that amplitude instead.
pub fn cmd_verify(cfg: &RunConfig, perturb: Option<f64>) -> Result<Value, CliError> {
    let s = surface(cfg)?;
    let v = &cfg.verify;
    let grid = HjbGrid {
        regions: vec![
            GridRegion::Restricted,
            GridRegion::FreeBoundary,
            GridRegion::AboveSafe,
        ],
        n_m: v.n_m,
        n_w: v.n_w,
        tol: v.hjb_tol,
        diagonal_tol: v.diagonal_tol,
        ..HjbGrid::default()
    };
    let hjb = match perturb {
        Some(a) => check_conditions(&Perturbed::centered(&s, a), &grid)?,
        None => check_conditions(&s, &grid)?,
    }
    .summary();
    let props = proposition_suite(
        &s,
        &PropositionGrid {
            n_w: v.proposition_points,
            n_sweep: v.proposition_points,
            ..PropositionGrid::default()
        },
    )?;
    let oracle = oracle_checks(cfg, &s)?;
    let pass = hjb.pass && props.pass && oracle.iter().all(|o| o.pass);
    let report = json!({
        "pass": pass,
        "perturbation": perturb,
        "m_star": s.m_star(),
        "conditions": hjb.conditions,
        "propositions": props,
        "oracle": oracle,
    });
    if pass {
        Ok(report)
    } else {
        Err(CliError::Assertion(report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyName {
    /// `π*`, tabulated.
    Optimal,
    /// The strategy minimizing the probability of ruin.
    Ruin,
    /// No investment.
    Riskless,
}

fn tabulate(s: &ValueSurface, m0: f64) -> Result<TabulatedStrategy, CliError> {
    let safe = s.market().safe_level();
    Ok(TabulatedStrategy::new(s, m0.min(0.999 * safe).max(1e-3 * safe), 400, 400)?)
}

/// One strategy scaled by `scale`, or with `compare`, `π*` against
/// `0.8·π*`, `1.2·π*` and the ruin strategy on common random numbers.
pub fn cmd_simulate(
    cfg: &RunConfig,
    w: f64,
    m: f64,
    strategy: StrategyName,
    scale: f64,
    compare: bool,
) -> Result<Value, CliError> {
    let sim: &SimConfig = &cfg.simulation;
    let mk = market(cfg)?;
    let ruin = RuinStrategy(mk);
    if compare {
        let s = surface(cfg)?;
        let opt = tabulate(&s, m)?;
        let (lo, hi) = (Scaled(0.8, opt.clone()), Scaled(1.2, opt.clone()));
        let c = compare_strategies(
            &mk,
            w,
            m,
            &[
                ("optimal", &opt),
                ("optimal_x0.8", &lo),
                ("optimal_x1.2", &hi),
                ("ruin", &ruin),
            ],
            sim,
        )?;
        return Ok(serde_json::to_value(c).expect("comparison serializes"));
    }
    let r = match strategy {
        StrategyName::Optimal => {
            let s = surface(cfg)?;
            simulate(&mk, &Scaled(scale, tabulate(&s, m)?), w, m, sim)?
        }
        StrategyName::Ruin => simulate(&mk, &Scaled(scale, ruin), w, m, sim)?,
        StrategyName::Riskless => simulate(&mk, &|_: f64, _: f64| 0.0, w, m, sim)?,
    };
    let mut v = serde_json::to_value(r).expect("result serializes");
    if m >= mk.safe_level() && strategy == StrategyName::Ruin && scale == 1.0 {
        let exact = drawdown::closed_region::phi_above_safe(&mk, w, m)?;
        v["closed_form"] = json!(exact);
        v["z_score"] = json!((r.estimate - exact) / r.std_error);
    }
    Ok(v)
}
