use std::sync::OnceLock;

use drawdown::controller_stopper::{m_hat, solve_x, y_boundaries};
use drawdown::free_boundary::{
    comparison_from_lower, comparison_from_right, integrate_from_gap, ode_rhs, shoot, DomainD0,
    FreeBoundaryCurve, ShootConfig, StepControl,
};
use drawdown::value_surface::ValueSurface;
use drawdown::{Market, MarketParams};

fn markets() -> [Market; 2] {
    [
        Market::new(MarketParams::SET_1).unwrap(),
        Market::new(MarketParams::SET_2).unwrap(),
    ]
}

fn curves() -> &'static [FreeBoundaryCurve; 2] {
    static CURVES: OnceLock<[FreeBoundaryCurve; 2]> = OnceLock::new();
    CURVES.get_or_init(|| {
        let [a, b] = markets();
        let cfg = ShootConfig::default();
        [shoot(&a, &cfg).unwrap(), shoot(&b, &cfg).unwrap()]
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn critical_mark_lies_left_of_the_singular_point() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let safe = mk.safe_level();
        let mh = m_hat(mk).unwrap();
        assert!(curve.m_star > 0.0 && curve.m_star < safe);
        assert!(curve.m_star < mh, "m* = {} ≥ m̂ = {mh}", curve.m_star);
        let z = curve.z_at(curve.m_star).unwrap();
        let lower = 1.0 / solve_x(mk, curve.m_star).unwrap();
        assert!((z - lower).abs() < 1e-8, "z(m*) = {z}, 1/x(m*) = {lower}");
    }
}

#[test]
fn critical_mark_is_insensitive_to_the_terminal_offset() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let at = |eps: f64| {
            curve
                .sweep
                .iter()
                .find(|(e, _)| *e == eps)
                .map(|(_, m)| *m)
                .unwrap()
        };
        let diff = (at(1e-4) - at(1e-5)).abs();
        assert!(diff <= 1e-4 * mk.safe_level(), "sweep spread {diff}");
        assert!((at(1e-8) - curve.m_star).abs() <= 1e-9 * mk.safe_level());
    }
}

#[test]
fn boundaries_join_the_restricted_ones_at_m_star() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let ms = curve.m_star;
        let tilde = curve.y_alpha_tilde(ms).unwrap();
        let hat = y_boundaries(mk, ms).unwrap().y_alpha_m;
        assert!(rel(tilde, hat) < 1e-6, "{tilde} vs {hat}");
        // The first stored node carries the integrated value, not the
        // lower-edge fallback.
        let mf = curve.m_first();
        let hat = y_boundaries(mk, mf).unwrap().y_alpha_m;
        assert!(rel(curve.y_alpha_tilde(mf).unwrap(), hat) < 1e-6);
    }
}

#[test]
fn upper_boundary_tends_to_its_terminal_limit() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let (b1, safe) = (mk.k.b1, mk.safe_level());
        let limit = b1 / ((b1 - 1.0) * (1.0 - mk.alpha()) * safe);
        let y = curve.y_alpha_tilde(safe * (1.0 - 1e-9)).unwrap();
        assert!(rel(y, limit) < 1e-6, "{y} vs {limit}");
    }
    let set1 = curves()[0].y_alpha_tilde(25.0 * (1.0 - 1e-9)).unwrap();
    assert!((set1 - 0.113723).abs() < 1e-6);
}

#[test]
fn ratio_stays_inside_the_region() {
    for (mk, curve) in markets().iter().zip(curves()) {
        for n in curve.nodes() {
            if n.u == 0.0 {
                continue;
            }
            let lower = 1.0 / drawdown::controller_stopper::solve_x_gap(mk, n.u).unwrap();
            assert!(n.z >= lower * (1.0 - 1e-9), "z = {} below {lower}", n.z);
            assert!(n.z <= 1.0);
        }
        assert_eq!(curve.z_at(mk.safe_level()).unwrap(), 0.0);
    }
}

#[test]
fn free_boundary_problem_holds() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let surface = ValueSurface::new(mk, curve.clone());
        let safe = mk.safe_level();
        let ms = curve.m_star;
        for i in 1..20 {
            let m = ms + (safe - ms) * i as f64 / 20.0;
            let f = surface.dual(m).unwrap();
            let am = mk.alpha() * m;
            let (ya, ym) = (f.y_alpha, f.y_m);
            assert!(rel(f.value(ya), 1.0 + am * ya) < 1e-10);
            assert!(rel(f.dy(ya), am) < 1e-10);
            assert!(rel(f.dy(ym), m) < 1e-10);

            // Envelope condition: the m-derivative at fixed y vanishes on
            // the lower boundary.
            let h = 1e-5 * safe;
            let up = surface.dual(m + h).unwrap().value(ym);
            let dn = surface.dual(m - h).unwrap().value(ym);
            let dm = (up - dn) / (2.0 * h);
            assert!(dm.abs() < 1e-6, "m = {m}: φ̃_m = {dm}");
        }
        // Terminal conditions as m → c/r.
        let m = safe * (1.0 - 1e-9);
        let f = surface.dual(m).unwrap();
        assert!((f.value(f.y_m) - safe * f.y_m).abs() < 1e-8);
        assert!((f.dy(f.y_m) - safe).abs() < 1e-6);
    }
}

#[test]
fn interior_solutions_are_unique() {
    for (mk, curve) in markets().iter().zip(curves()) {
        let domain = DomainD0::new(mk).unwrap();
        let safe = mk.safe_level();
        let m0 = 0.5 * (curve.m_star + safe);
        let z0 = curve.z_at(m0).unwrap();
        let tight = StepControl::default();
        let loose = StepControl {
            rtol: 1e-9,
            h_max_m: 0.01,
            h_max_z: 0.002,
            ..StepControl::default()
        };
        let run = |ctl: &StepControl| {
            integrate_from_gap(mk, &domain, safe - m0, z0, 1e-3 * safe, ctl, 1e-10)
                .unwrap()
                .crossing
                .0
        };
        let (a, b) = (run(&tight), run(&loose));
        assert!((a - b).abs() < 1e-6 * safe, "{a} vs {b}");
        assert!((a - curve.m_star).abs() < 1e-6 * safe);
    }
}

#[test]
fn comparison_curves_squeeze_the_solution() {
    let ctl = StepControl::default();
    for (mk, curve) in markets().iter().zip(curves()) {
        let safe = mk.safe_level();
        let mh = m_hat(mk).unwrap();
        let below = comparison_from_lower(mk, mh + 0.9 * (safe - mh), &ctl).unwrap();
        let above = comparison_from_right(mk, 0.05, &ctl).unwrap();
        for tr in [&below, &above] {
            assert!(tr.crossing.0 < mh, "crossing at {} ≥ m̂", tr.crossing.0);
        }
        let lo = curve.m_first();
        let mut checked = 0;
        for (tr, sign) in [(&below, -1.0), (&above, 1.0)] {
            for n in tr.nodes.iter().filter(|n| n.m > lo && n.m < safe) {
                let z = curve.z_at(n.m).unwrap();
                assert!(sign * (n.z - z) > 0.0, "m = {}: {} vs {z}", n.m, n.z);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }
}

#[test]
fn ruin_limit_curve_solves_the_ode() {
    let mk = Market::new(MarketParams {
        alpha: 0.0,
        ..MarketParams::SET_1
    })
    .unwrap();
    let curve = shoot(&mk, &ShootConfig::default()).unwrap();
    assert!(curve.is_ruin_limit());
    assert_eq!(curve.m_star, 0.0);
    let (safe, g) = (mk.safe_level(), mk.k.gamma);
    for i in 1..20 {
        let m = safe * i as f64 / 20.0;
        let z = curve.z_at(m).unwrap();
        let exact = -(g - 1.0) / safe * (1.0 - m / safe).powf(g - 2.0);
        let rhs = ode_rhs(&mk, m, z).unwrap();
        assert!(rel(rhs, exact) < 1e-8, "m = {m}: {rhs} vs {exact}");
    }
}

#[test]
fn csv_export_round_trips() {
    let curve = &curves()[0];
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,z,y_m,y_alpha_m"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), curve.nodes().len());
    assert!(!text.contains('\r'));
    for (row, node) in rows.iter().zip(curve.nodes().iter().rev()) {
        assert_eq!(row[0], node.m);
        assert_eq!(row[1], node.z);
        assert!((row[2] - row[1] * row[3]).abs() <= 1e-15 * row[3]);
    }
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
}
