//! Bracketed scalar root finding.
//!
//! Brent's method: inverse quadratic / secant steps guarded by bisection,
//! so the bracket always shrinks and convergence is guaranteed for any
//! continuous function with a sign change.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-12,
            abs: 1e-300,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }
}

/// Finds a root of `f` in `[lo, hi]`.
///
/// Endpoint zeros are returned as-is. Errors if `f(lo)` and `f(hi)` have
/// the same strict sign.
pub fn brent<F>(what: &'static str, mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            what,
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.rel * b.abs()).max(tol.abs);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::NoConvergence {
                what,
                iterations: tol.max_iter,
            });
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: tol.max_iter,
    })
}

/// Doubles `hi` (starting from `hi0 > lo`) until `f(hi)` has the sign
/// opposite to `f(lo)`, then returns `(lo, hi)`.
pub fn expand_upper<F>(
    what: &'static str,
    mut f: F,
    lo: f64,
    hi0: f64,
    max_doublings: usize,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let mut hi = hi0;
    for _ in 0..max_doublings {
        let f_hi = f(hi);
        if f_hi.signum() != f_lo.signum() || f_hi == 0.0 {
            return Ok((lo, hi));
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_doublings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let x = brent("sqrt", |x| x * x - 2.0, 0.0, 2.0, Tolerance::rel(1e-15)).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn endpoint_root_is_exact() {
        let x = brent("lin", |x| x - 1.0, 1.0, 3.0, Tolerance::default()).unwrap();
        assert_eq!(x, 1.0);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        let err = brent("sq", |x| x * x + 1.0, -1.0, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn steep_monotone_function() {
        // Root at 1 + 1e-9 with a derivative spanning many decades.
        let f = |x: f64| (x - 1.0 - 1e-9) * (1.0 + 1e6 * x.powi(8));
        let x = brent("steep", f, 0.0, 50.0, Tolerance::default()).unwrap();
        assert!((x - (1.0 + 1e-9)).abs() < 1e-12);
    }

    #[test]
    fn expansion_finds_far_root() {
        let f = |x: f64| x - 1000.0;
        let (lo, hi) = expand_upper("far", f, 1.0, 2.0, 60).unwrap();
        assert!(lo == 1.0 && hi >= 1000.0);
        let x = brent("far", f, lo, hi, Tolerance::default()).unwrap();
        assert!((x - 1000.0).abs() < 1e-9);
    }
}
