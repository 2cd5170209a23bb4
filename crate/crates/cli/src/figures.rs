//! Data behind the eight figures, as CSV tables.

use std::io::Write;

use drawdown::closed_region::pi_ruin;
use drawdown::free_boundary::{
    comparison_from_lower, comparison_from_right, DomainD0, StepControl,
};
use drawdown::value_surface::ValueSurface;
use drawdown::{Error, Market, Result};

/// Numbers are written with 17 significant digits, so they parse back to
/// the same bits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(num).collect());
    }

    /// Comma-separated, header first, LF line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const ALL: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

pub fn file_name(which: u8) -> String {
    format!("figure{which}.csv")
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

fn needs_free_boundary(market: &Market, which: u8) -> Result<()> {
    if market.alpha() == 0.0 {
        return Err(Error::Config(format!(
            "figure {which} needs α > 0: the free-boundary regime is empty"
        )));
    }
    Ok(())
}

pub fn figure(surface: &ValueSurface, which: u8) -> Result<Table> {
    match which {
        1 => domain(surface.market()),
        2 => integral_curves(surface.market()),
        3 => boundary_ratio(surface),
        4 => diagonal_strategy(surface),
        5 => value_samples(surface),
        6 => strategy_in_w(surface),
        7 => strategy_in_m(surface),
        8 => ruin_gap(surface),
        _ => Err(Error::Config(format!("no figure {which}; expected 1 to 8"))),
    }
}

/// The four boundary pieces of `D₀`. `lower` and `left` share the point
/// `(m̂, 1/x(m̂))`.
fn domain(market: &Market) -> Result<Table> {
    needs_free_boundary(market, 1)?;
    let d = DomainD0::new(market)?;
    let safe = market.safe_level();
    let mut t = Table::new(&["piece", "m", "z"]);
    let n = 201;
    let mut piece = |name: &str, pts: Vec<(f64, f64)>| {
        for (m, z) in pts {
            t.push(vec![name.to_string(), num(m), num(z)]);
        }
    };
    piece("upper", linspace(0.0, safe, n).map(|m| (m, 1.0)).collect());
    piece("right", linspace(0.0, 1.0, n).map(|z| (safe, z)).collect());
    let edge = |lo: f64, hi: f64| -> Result<Vec<(f64, f64)>> {
        linspace(lo, hi, n)
            .map(|m| Ok((m, if m == d.m_hat { d.z_hat } else { d.lower_edge(m)? })))
            .collect()
    };
    piece("left", edge(0.0, d.m_hat)?);
    piece("lower", edge(d.m_hat, safe)?);
    Ok(t)
}

/// Trajectories through points of the lower edge right of `m̂` and of the
/// right edge, each followed to where it meets the edge again.
fn integral_curves(market: &Market) -> Result<Table> {
    needs_free_boundary(market, 2)?;
    let d = DomainD0::new(market)?;
    let safe = market.safe_level();
    let ctl = StepControl::default();
    let mut t = Table::new(&["curve", "start", "m", "z"]);
    let mut id = 0;
    let mut add = |start: &str, nodes: Vec<(f64, f64)>| {
        for (m, z) in nodes {
            t.push(vec![id.to_string(), start.to_string(), num(m), num(z)]);
        }
        id += 1;
    };
    for f in [0.2, 0.4, 0.6, 0.8] {
        let tr = comparison_from_lower(market, d.m_hat + f * (safe - d.m_hat), &ctl)?;
        add("lower", tr.nodes.iter().map(|n| (n.m, n.z)).collect());
    }
    for z0 in [0.01, 0.02, 0.05, 0.1] {
        let tr = comparison_from_right(market, z0, &ctl)?;
        add("right", tr.nodes.iter().map(|n| (n.m, n.z)).collect());
    }
    Ok(t)
}

/// `z(m)` on `[m*, c/r]`.
fn boundary_ratio(surface: &ValueSurface) -> Result<Table> {
    needs_free_boundary(surface.market(), 3)?;
    let safe = surface.market().safe_level();
    let mut t = Table::new(&["m", "z"]);
    for m in linspace(surface.m_star(), safe, 401) {
        t.push_nums(&[m, surface.curve().z_at(m)?]);
    }
    Ok(t)
}

/// `π*(m, m)` on `[m*, c/r]`.
fn diagonal_strategy(surface: &ValueSurface) -> Result<Table> {
    needs_free_boundary(surface.market(), 4)?;
    let safe = surface.market().safe_level();
    let mut t = Table::new(&["m", "pi_star"]);
    for m in linspace(surface.m_star(), safe, 401) {
        t.push_nums(&[m, surface.pi_star(m, m)?]);
    }
    Ok(t)
}

/// `φ` and `π*` on a grid of `(m, w)` with `m` up to `1.2·c/r`.
fn value_samples(surface: &ValueSurface) -> Result<Table> {
    let mk = surface.market();
    let top = 1.2 * mk.safe_level();
    let mut t = Table::new(&["m", "w", "phi", "pi_star"]);
    for j in 1..=60 {
        let m = top * j as f64 / 60.0;
        let slice = surface.slice(m)?;
        for w in linspace(mk.alpha() * m, m.min(mk.safe_level()), 41) {
            let e = slice.evaluate(w)?;
            t.push_nums(&[m, w, e.phi, e.pi_star]);
        }
    }
    Ok(t)
}

fn sample_marks(surface: &ValueSurface) -> Vec<f64> {
    let (ms, safe) = (surface.m_star(), surface.market().safe_level());
    let below = [0.25, 0.5, 0.75, 1.0].map(|f| f * ms);
    let above = [0.25, 0.5, 0.75].map(|f| ms + f * (safe - ms));
    below.into_iter().chain(above).filter(|&m| m > 0.0).collect()
}

/// `π*(·, m)` for marks on both sides of `m*`.
fn strategy_in_w(surface: &ValueSurface) -> Result<Table> {
    let mk = surface.market();
    let mut t = Table::new(&["m", "w", "pi_star"]);
    for m in sample_marks(surface) {
        let slice = surface.slice(m)?;
        for w in linspace(mk.alpha() * m, m, 201) {
            t.push_nums(&[m, w, slice.evaluate(w)?.pi_star]);
        }
    }
    Ok(t)
}

/// `π*(w, ·)` for fixed wealth, over `w ≤ m ≤ min(w/α, c/r)`.
fn strategy_in_m(surface: &ValueSurface) -> Result<Table> {
    let mk = surface.market();
    let safe = mk.safe_level();
    let mut t = Table::new(&["w", "m", "pi_star"]);
    for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let w = f * safe;
        let hi = if mk.alpha() > 0.0 { (w / mk.alpha()).min(safe) } else { safe };
        for m in linspace(w, hi, 201) {
            t.push_nums(&[w, m, surface.pi_star(w, m)?]);
        }
    }
    Ok(t)
}

/// `pi_ruin(w) - π*(w, m)` at interior points of interior marks.
fn ruin_gap(surface: &ValueSurface) -> Result<Table> {
    let mk = surface.market();
    let safe = mk.safe_level();
    let mut t = Table::new(&["m", "w", "gap"]);
    let n_m = 20;
    for j in 1..=n_m {
        let m = safe * j as f64 / (n_m + 1) as f64;
        let slice = surface.slice(m)?;
        let lo = mk.alpha() * m;
        for i in 1..100 {
            let w = lo + (m - lo) * i as f64 / 100.0;
            t.push_nums(&[m, w, pi_ruin(mk, w) - slice.evaluate(w)?.pi_star]);
        }
    }
    Ok(t)
}
