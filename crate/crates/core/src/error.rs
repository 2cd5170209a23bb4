use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A market parameter violates its admissible range.
    #[error("invalid parameter {name} = {value}: requires {bound}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        bound: String,
    },

    /// An evaluation point lies outside the domain of the function.
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    /// The root finder was handed an interval without a sign change.
    #[error("{what}: no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Backward integration of the free-boundary ODE failed.
    #[error("shooting failed: {reason}")]
    Shooting {
        reason: String,
        /// Visited `(m, z)` points, for diagnostics.
        trajectory: Vec<(f64, f64)>,
    },

    #[error("simulation aborted: {aborted} of {n_paths} paths produced non-finite wealth")]
    Simulation { aborted: u64, n_paths: u64 },

    #[error("{0}")]
    Config(String),
}
