//! Model primitives and the constants derived from them.
//!
//! Wealth follows `dW = (rW + (μ - r)π - c) dt + σπ dB`, death arrives at
//! rate `λ`, and drawdown is the event `W ≤ α·M` for the running maximum `M`.
//! Every other module works with a [`Market`], which bundles validated
//! [`MarketParams`] with their [`DerivedConstants`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six model primitives, in per-year units.
///
/// Serialized with the exact field names `mu`, `sigma`, `r`, `c`,
/// `lambda`, `alpha`; all are required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Riskless rate.
    pub r: f64,
    /// Consumption rate.
    pub c: f64,
    /// Hazard rate of death.
    #[serde(rename = "lambda")]
    pub lam: f64,
    /// Drawdown fraction of the running maximum.
    pub alpha: f64,
}

impl MarketParams {
    /// Left panel of the reference parameter sets: `μ = 0.06`.
    pub const SET_1: MarketParams = MarketParams {
        mu: 0.06,
        sigma: 0.20,
        r: 0.04,
        c: 1.0,
        lam: 0.04,
        alpha: 0.5,
    };

    /// Right panel: as [`SET_1`](Self::SET_1) but with `μ = 0.12`.
    pub const SET_2: MarketParams = MarketParams {
        mu: 0.12,
        ..Self::SET_1
    };

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &'static str, value: f64, bound: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    bound: bound.to_string(),
                })
            }
        };
        let all = [self.mu, self.sigma, self.r, self.c, self.lam, self.alpha];
        if let Some(bad) = all.iter().position(|v| !v.is_finite()) {
            let names = ["mu", "sigma", "r", "c", "lambda", "alpha"];
            return Err(Error::InvalidParameter {
                name: names[bad],
                value: all[bad],
                bound: "a finite value".into(),
            });
        }
        check(self.r > 0.0, "r", self.r, "r > 0")?;
        check(self.mu > self.r, "mu", self.mu, &format!("mu > r = {}", self.r))?;
        check(self.sigma > 0.0, "sigma", self.sigma, "sigma > 0")?;
        check(self.c > 0.0, "c", self.c, "c > 0")?;
        check(self.lam > 0.0, "lambda", self.lam, "lambda > 0")?;
        check(
            (0.0..1.0).contains(&self.alpha),
            "alpha",
            self.alpha,
            "0 <= alpha < 1",
        )
    }

    /// The safe level `c/r`, above which drawdown is impossible.
    #[inline]
    pub fn safe_level(&self) -> f64 {
        self.c / self.r
    }

    /// `(μ - r)/σ²`, the factor in every feedback strategy.
    #[inline]
    pub fn merton_ratio(&self) -> f64 {
        (self.mu - self.r) / (self.sigma * self.sigma)
    }
}

/// Constants derived once per parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `½((μ - r)/σ)²`.
    pub delta: f64,
    /// Exponent of the ruin-probability closed form; `γ > 1`.
    pub gamma: f64,
    /// Positive root of `δB² - (r - λ + δ)B - λ = 0`; equals `γ/(γ-1)`.
    pub b1: f64,
    /// Negative root of the same quadratic.
    pub b2: f64,
    pub safe_level: f64,
}

pub fn derive_constants(p: &MarketParams) -> Result<DerivedConstants> {
    p.validate()?;
    let sharpe = (p.mu - p.r) / p.sigma;
    let delta = 0.5 * sharpe * sharpe;

    let a = p.r + p.lam + delta;
    let root = (a * a - 4.0 * p.r * p.lam).sqrt();
    // γ - 1 = 2δ / (root + r - λ - δ); use it when γ is close to 1.
    let gamma = if p.r - p.lam - delta > 0.0 {
        1.0 + 2.0 * delta / (root + p.r - p.lam - delta)
    } else {
        (a + root) / (2.0 * p.r)
    };

    // Roots of δB² - bB - λ = 0. The product of the roots is -λ/δ, which
    // gives the smaller-magnitude root without cancellation.
    let b = p.r - p.lam + delta;
    let disc = (b * b + 4.0 * p.lam * delta).sqrt();
    let (b1, b2) = if b >= 0.0 {
        let b1 = (b + disc) / (2.0 * delta);
        (b1, -p.lam / (delta * b1))
    } else {
        let b2 = (b - disc) / (2.0 * delta);
        (-p.lam / (delta * b2), b2)
    };

    Ok(DerivedConstants {
        delta,
        gamma,
        b1,
        b2,
        safe_level: p.safe_level(),
    })
}

/// Validated parameters together with their derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Market {
    pub params: MarketParams,
    pub k: DerivedConstants,
}

impl Market {
    pub fn new(params: MarketParams) -> Result<Self> {
        let k = derive_constants(&params)?;
        Ok(Self { params, k })
    }

    #[inline]
    pub fn safe_level(&self) -> f64 {
        self.k.safe_level
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: MarketParams =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("parameters: {e}")))?;
        Self::new(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn set_1_constants() {
        let k = derive_constants(&MarketParams::SET_1).unwrap();
        assert!((k.delta - 0.005).abs() < 1e-15);
        assert!((k.gamma - 1.421535).abs() < 1e-6);
        // B² - B - 8 = 0 for this set.
        let root = (1.0 + 33f64.sqrt()) / 2.0;
        assert!(rel(k.b1, root) < 1e-14);
        assert!(rel(k.b2, 1.0 - root) < 1e-14);
        assert_eq!(k.safe_level, 25.0);
    }

    #[test]
    fn set_2_constants() {
        let k = derive_constants(&MarketParams::SET_2).unwrap();
        assert!((k.delta - 0.08).abs() < 1e-15);
        assert!((k.gamma - (2.0 + 3f64.sqrt())).abs() < 1e-12);
        assert!((k.b1 - 1.366025).abs() < 1e-6);
        assert!((k.b2 + 0.366025).abs() < 1e-6);
    }

    #[test]
    fn rejects_each_bound() {
        let base = MarketParams::SET_1;
        let cases = [
            (MarketParams { mu: 0.03, ..base }, "mu"),
            (MarketParams { sigma: 0.0, ..base }, "sigma"),
            (MarketParams { r: 0.0, ..base }, "r"),
            (MarketParams { c: -1.0, ..base }, "c"),
            (MarketParams { lam: 0.0, ..base }, "lambda"),
            (MarketParams { alpha: 1.0, ..base }, "alpha"),
            (MarketParams { alpha: -0.1, ..base }, "alpha"),
            (MarketParams { mu: f64::NAN, ..base }, "mu"),
        ];
        for (p, expect) in cases {
            match derive_constants(&p) {
                Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, expect),
                other => panic!("{p:?}: expected rejection of {expect}, got {other:?}"),
            }
        }
    }

    #[test]
    fn json_schema_is_exact() {
        let ok = r#"{"mu":0.06,"sigma":0.2,"r":0.04,"c":1,"lambda":0.04,"alpha":0.5}"#;
        assert_eq!(Market::from_json(ok).unwrap().params, MarketParams::SET_1);
        let missing = r#"{"mu":0.06,"sigma":0.2,"r":0.04,"c":1,"lambda":0.04}"#;
        assert!(Market::from_json(missing).is_err());
        let renamed = r#"{"mu":0.06,"sigma":0.2,"r":0.04,"c":1,"lam":0.04,"alpha":0.5}"#;
        assert!(Market::from_json(renamed).is_err());
    }

    fn valid_params() -> impl Strategy<Value = MarketParams> {
        (
            0.001f64..0.2,
            0.0005f64..0.3,
            0.02f64..1.0,
            0.1f64..10.0,
            0.001f64..0.5,
            0.0f64..0.99,
        )
            .prop_map(|(r, excess, sigma, c, lam, alpha)| MarketParams {
                mu: r + excess,
                sigma,
                r,
                c,
                lam,
                alpha,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derived_invariants(p in valid_params()) {
            let k = derive_constants(&p).unwrap();
            prop_assert!(k.delta > 0.0);
            prop_assert!(k.gamma > 1.0);
            prop_assert!(k.b1 > 1.0);
            prop_assert!(k.b2 < 0.0);
            // γ/(γ-1) amplifies the rounding of γ by γ/(γ-1).
            let cond = k.gamma / (k.gamma - 1.0);
            prop_assert!(rel(k.b1, cond) <= 1e-13 * cond);
            for b in [k.b1, k.b2] {
                let terms = [k.delta * b * b, (p.r - p.lam + k.delta) * b, p.lam];
                let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
                let resid = terms[0] - terms[1] - terms[2];
                prop_assert!(resid.abs() <= 1e-10 * scale);
            }
        }
    }
}
