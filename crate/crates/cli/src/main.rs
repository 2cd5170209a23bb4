use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use drawdown::monte_carlo::Estimator;
use drawdown::MarketParams;
use drawdown_cli::config::{Format, RunConfig};
use drawdown_cli::{figures, CliError, StrategyName, EXIT_USAGE};

/// Minimum probability of lifetime drawdown and the optimal investment
/// strategy.
#[derive(Debug, Parser)]
#[command(name = "drawdown", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; fields left out keep their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in parameter set (1: μ = 0.06, 2: μ = 0.12); not combined
    /// with --config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    set: Option<u8>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Directory for data files.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Format of flat reports on standard output.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print δ, γ, B₁, B₂ and c/r.
    Constants,
    /// Shoot for the critical mark m* and write the boundary-ratio curve.
    Mstar {
        /// Curve file; defaults to free_boundary_curve.csv in the output
        /// directory.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate φ, π*, the regime and the dual variable at one point.
    Eval {
        #[arg(long, allow_negative_numbers = true)]
        w: f64,
        #[arg(long, allow_negative_numbers = true)]
        m: f64,
    },
    /// Write the data behind the figures as CSV files.
    Figures {
        /// Figure numbers; all eight when omitted.
        #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=8))]
        which: Vec<u8>,
    },
    /// Run the verification conditions, the monotonicity suite and the
    /// oracle comparison; exit 1 if a hard check fails.
    Verify {
        /// Check a surface with a bump of this amplitude instead (a
        /// negative control).
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Monte Carlo estimate of the drawdown probability.
    Simulate {
        #[arg(long)]
        w: f64,
        #[arg(long)]
        m: f64,
        #[arg(long, value_enum, default_value = "optimal")]
        strategy: StrategyName,
        /// Multiplies the strategy.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Compare π* with 0.8·π*, 1.2·π* and the ruin strategy on common
        /// random numbers.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        n_paths: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Disable the Brownian-bridge crossing correction.
        #[arg(long)]
        no_bridge: bool,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum EstimatorArg {
    Discounted,
    Mortality,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match (&common.config, common.set) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--config and --set are alternative parameter sources".into(),
            ))
        }
        (Some(path), None) => RunConfig::load(path)?,
        (None, set) => RunConfig {
            params: if set == Some(2) {
                MarketParams::SET_2
            } else {
                MarketParams::SET_1
            },
            ..RunConfig::default()
        },
    };
    let p = &mut cfg.params;
    for (flag, field) in [
        (common.mu, &mut p.mu),
        (common.sigma, &mut p.sigma),
        (common.r, &mut p.r),
        (common.c, &mut p.c),
        (common.lambda, &mut p.lam),
        (common.alpha, &mut p.alpha),
    ] {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(o) = &common.output {
        cfg.output.clone_from(o);
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DRAWDOWN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("DRAWDOWN_THREADS={v}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(Value, Format), CliError> {
    configure_threads()?;
    let mut cfg = resolve(&cli.common)?;
    if let Command::Simulate {
        n_paths,
        dt,
        horizon,
        seed,
        estimator,
        no_bridge,
        ..
    } = &cli.command
    {
        let s = &mut cfg.simulation;
        s.n_paths = n_paths.unwrap_or(s.n_paths);
        s.dt = dt.unwrap_or(s.dt);
        s.horizon = horizon.unwrap_or(s.horizon);
        s.master_seed = seed.unwrap_or(s.master_seed);
        if let Some(e) = estimator {
            s.estimator = match e {
                EstimatorArg::Discounted => Estimator::Discounted,
                EstimatorArg::Mortality => Estimator::Mortality,
            };
        }
        s.bridge &= !no_bridge;
    }
    cfg.validate()?;
    let value = match cli.command {
        Command::Constants => drawdown_cli::cmd_constants(&cfg),
        Command::Mstar { curve } => drawdown_cli::cmd_mstar(&cfg, curve.as_deref()),
        Command::Eval { w, m } => drawdown_cli::cmd_eval(&cfg, w, m),
        Command::Figures { which } => {
            let which = if which.is_empty() { figures::ALL.to_vec() } else { which };
            drawdown_cli::cmd_figures(&cfg, &which)
        }
        Command::Verify { perturb } => drawdown_cli::cmd_verify(&cfg, perturb),
        Command::Simulate {
            w,
            m,
            strategy,
            scale,
            compare,
            ..
        } => drawdown_cli::cmd_simulate(&cfg, w, m, strategy, scale, compare),
    }?;
    Ok((value, cfg.format))
}

/// A flat object as a header row and a value row; anything else as JSON.
fn render(v: &Value, format: Format) -> String {
    if let (Format::Csv, Value::Object(map)) = (format, v) {
        if map.values().all(|x| !x.is_object() && !x.is_array()) {
            let cell = |x: &Value| match x {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            };
            let header: Vec<&str> = map.keys().map(String::as_str).collect();
            let row: Vec<String> = map.values().map(cell).collect();
            return format!("{}\n{}", header.join(","), row.join(","));
        }
    }
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((v, format)) => {
            println!("{}", render(&v, format));
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Assertion(report) = &e {
                println!("{}", render(report, Format::Json));
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
