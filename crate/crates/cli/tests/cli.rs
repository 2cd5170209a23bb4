use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use drawdown::value_surface::ValueSurface;
use drawdown::{Market, MarketParams};

fn drawdown(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drawdown"))
        .args(args)
        .env_remove("DRAWDOWN_THREADS")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = drawdown(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

fn surface(p: MarketParams) -> ValueSurface {
    ValueSurface::build(&Market::new(p).unwrap()).unwrap()
}

#[test]
fn constants_of_the_first_set() {
    let v = ok_json(&["constants"]);
    assert!((v["gamma"].as_f64().unwrap() - 1.421535).abs() < 1e-6);
    assert!((v["b1"].as_f64().unwrap() - 3.372281).abs() < 1e-6);
    assert!((v["b2"].as_f64().unwrap() + 2.372281).abs() < 1e-6);
    assert!((v["delta"].as_f64().unwrap() - 0.005).abs() < 1e-12);
    assert_eq!(v["safe_level"].as_f64().unwrap(), 25.0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let params = serde_json::to_value(MarketParams::SET_2).unwrap();
    fs::write(&path, serde_json::json!({ "params": params }).to_string()).unwrap();
    let p = path.to_str().unwrap();
    let set2 = ok_json(&["--config", p, "constants"]);
    assert!((set2["gamma"].as_f64().unwrap() - 3.732051).abs() < 1e-6);
    assert_eq!(ok_json(&["--config", p, "--mu", "0.06", "constants"]), ok_json(&["constants"]));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"parameters": {}}"#).unwrap();
    let b = bad.to_str().unwrap();
    assert_eq!(code(&drawdown(&["--config", b, "constants"])), 2);
    assert_eq!(code(&drawdown(&["--config", b, "--set", "1", "constants"])), 2);
    assert_eq!(code(&drawdown(&["--sigma", "-1", "constants"])), 2);
    assert_eq!(code(&drawdown(&["eval", "--w", "1", "--m", "25"])), 2);
    assert_eq!(code(&drawdown(&["frobnicate"])), 2);
    let threads = Command::new(env!("CARGO_BIN_EXE_drawdown"))
        .arg("constants")
        .env("DRAWDOWN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);
}

#[test]
fn unsettled_sweep_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strict.json");
    fs::write(&path, r#"{"solver": {"sweep_tol": 1e-300}}"#).unwrap();
    let out = drawdown(&["--config", path.to_str().unwrap(), "mstar"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn critical_mark_for_both_sets() {
    for set in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let v = ok_json(&["--set", set, "--output", dir.path().to_str().unwrap(), "mstar"]);
        let (ms, mh) = (v["m_star"].as_f64().unwrap(), v["m_hat"].as_f64().unwrap());
        assert!(0.0 < ms && ms < mh && mh < 25.0, "{v}");
        let (header, rows) = read_csv(&dir.path().join("free_boundary_curve.csv"));
        assert_eq!(header, ["m", "z", "y_m", "y_alpha_m"]);
        assert!(rows.len() > 10);
    }
}

#[test]
fn zero_drawdown_fraction_reports_the_ruin_limit() {
    let v = ok_json(&["--alpha", "0", "mstar"]);
    assert_eq!(v["m_star"].as_f64(), Some(0.0));
    assert_eq!(v["message"], drawdown_cli::RUIN_LIMIT_MESSAGE);
}

#[test]
fn evaluation_examples() {
    let v = ok_json(&["eval", "--w", "18.75", "--m", "25"]);
    assert!((v["phi"].as_f64().unwrap() - 0.37329).abs() < 1e-4);
    assert_eq!(v["regime"], "above_safe");
    let v = ok_json(&["eval", "--w", "5", "--m", "10"]);
    assert_eq!(v["phi"].as_f64(), Some(1.0));
    assert_eq!(v["regime"], "restricted");
    let v = ok_json(&["eval", "--w", "25", "--m", "25"]);
    assert_eq!(v["pi_star"].as_f64(), Some(0.0));
    let v = ok_json(&["eval", "--w", "18", "--m", "20"]);
    assert_eq!(v["regime"], "free_boundary");
    assert!(v["y"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_report_is_a_header_and_a_row() {
    let out = drawdown(&["--format", "csv", "eval", "--w", "18.75", "--m", "25"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "m,phi,pi_star,regime,w,y");
    assert!(lines[1].contains("above_safe"));
}

fn figures(set: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["--set", set, "--output", dir.path().to_str().unwrap(), "figures"]);
    assert_eq!(v["files"].as_array().unwrap().len(), 8);
    dir
}

#[test]
fn figure_files_reevaluate_bit_exactly() {
    let dir = figures("1");
    let s = surface(MarketParams::SET_1);
    let (header, rows) = read_csv(&dir.path().join("figure5.csv"));
    assert_eq!(header, ["m", "w", "phi", "pi_star"]);
    for r in &rows {
        let e = s.evaluate(f(&r[1]), f(&r[0])).unwrap();
        assert_eq!(e.phi.to_bits(), f(&r[2]).to_bits(), "{r:?}");
        assert_eq!(e.pi_star.to_bits(), f(&r[3]).to_bits(), "{r:?}");
    }
    let (_, rows) = read_csv(&dir.path().join("figure7.csv"));
    for r in &rows {
        let pi = s.pi_star(f(&r[0]), f(&r[1])).unwrap();
        assert_eq!(pi.to_bits(), f(&r[2]).to_bits());
    }
}

#[test]
fn figures_are_deterministic() {
    let (a, b) = (figures("2"), figures("2"));
    for k in 1..=8 {
        let name = format!("figure{k}.csv");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn figure_properties() {
    for (set, params) in [("1", MarketParams::SET_1), ("2", MarketParams::SET_2)] {
        let dir = figures(set);
        let s = surface(params);
        let (m_star, m_hat) = (s.m_star(), s.curve().m_hat);

        let (_, rows) = read_csv(&dir.path().join("figure1.csv"));
        let end = |piece: &str, last: bool| {
            let pts: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == piece).collect();
            let r = if last { pts[pts.len() - 1] } else { pts[0] };
            (f(&r[1]), f(&r[2]))
        };
        assert_eq!(end("left", true), end("lower", false));
        assert_eq!(end("left", true).0, m_hat);

        let (_, rows) = read_csv(&dir.path().join("figure2.csv"));
        let mut last: BTreeMap<String, f64> = BTreeMap::new();
        for r in &rows {
            last.insert(r[0].clone(), f(&r[2]));
        }
        assert!(last.len() >= 8);
        assert!(last.values().all(|&m| m > 0.0 && m < m_hat), "{last:?}");

        let (_, rows) = read_csv(&dir.path().join("figure4.csv"));
        let pi: Vec<f64> = rows.iter().map(|r| f(&r[1])).collect();
        assert_eq!(f(&rows[0][0]), m_star);
        assert!(pi[0].abs() < 1e-8 && pi[pi.len() - 1].abs() < 1e-8);
        assert!(pi[1..pi.len() - 1].iter().all(|&p| p > 0.0));

        let (_, rows) = read_csv(&dir.path().join("figure8.csv"));
        assert!(rows.iter().all(|r| f(&r[2]) > 0.0));
    }
}

#[test]
fn verify_passes_and_its_negative_control_fails() {
    let v = ok_json(&["verify"]);
    assert_eq!(v["pass"], true);
    let out = drawdown(&["verify", "--perturb", "1e-3"]);
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn simulation_matches_the_closed_form_and_is_reproducible() {
    let args = [
        "simulate", "--w", "18.75", "--m", "25", "--strategy", "ruin", "--n-paths", "5000",
        "--estimator", "mortality",
    ];
    let v = ok_json(&args);
    assert!(v["z_score"].as_f64().unwrap().abs() <= 3.0, "{v}");
    let threaded = Command::new(env!("CARGO_BIN_EXE_drawdown"))
        .args(args)
        .env("DRAWDOWN_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(serde_json::from_slice::<Value>(&threaded.stdout).unwrap(), v);
}

#[test]
fn comparison_reports_every_alternative() {
    let v = ok_json(&[
        "simulate", "--w", "6", "--m", "10", "--compare", "--n-paths", "2000", "--dt", "1e-2",
        "--estimator", "mortality",
    ]);
    let names: Vec<&str> = v["differences"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["optimal_x0.8", "optimal_x1.2", "ruin"]);
}
