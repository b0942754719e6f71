use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrate::{solve, IntegratorSpec, Output};
use crate::synth::EmbeddingTarget;

/// Allowed spread `max/min` of the products across `x0`.
pub const SPREAD_LIMIT: f64 = 4.0;
/// Distance from `2 pi Z` below which a frequency counts as resonant.
pub const RESONANCE_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    #[inline]
    fn eval(self, t: f64) -> f64 {
        match self {
            Trig::Sin => t.sin(),
            Trig::Cos => t.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscCheck {
    pub name: String,
    pub a: f64,
    pub trig: Trig,
    /// Exponent multiplying `x0` in the reported products.
    pub beta: f64,
    pub x0_list: Vec<f64>,
    pub x_max: f64,
    /// `sup_x |∫_{x0}^x ...|` per `x0`.
    pub sup_integral: Vec<f64>,
    pub products: Vec<f64>,
    pub spread: f64,
    /// `products[last] / products[0]`.
    pub growth: f64,
    pub limit: f64,
}

impl OscCheck {
    pub fn passed(&self) -> bool {
        self.spread <= self.limit
    }
}

fn validate_range(x0_list: &[f64], x_max: f64) -> Result<()> {
    if x0_list.is_empty() || x0_list.iter().any(|&x| !(x > 0.0 && x < x_max)) {
        return Err(invalid("x0_list", "need 0 < x0 < x_max for every entry"));
    }
    Ok(())
}

/// Distance from `a` to `2 pi Z`.
pub fn distance_to_resonance(a: f64) -> f64 {
    (a - TAU * (a / TAU).round()).abs()
}

/// `sup_{x0 <= x <= x_max} |∫_{x0}^x weight(t) trig(theta(t)) dt|` with
/// `theta = a (t - x0) + phi`, `phi' = drift`, `theta(x0) = 0`.
fn sup_integral<D, W>(a: f64, drift: D, weight: W, trig: Trig, x0: f64, x_max: f64, spec: &IntegratorSpec) -> Result<f64>
where
    D: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let period = TAU / a.abs().max(1e-12);
    let spec = IntegratorSpec {
        max_step: spec.max_step.min(period / 8.0),
        ..*spec
    };
    let f = |x: f64, y: &[f64; 2], d: &mut [f64; 2]| {
        let theta = a * (x - x0) + y[0];
        *d = [drift(x), weight(x) * trig.eval(theta)];
    };
    let mut sup: f64 = 0.0;
    solve(&f, x0, x_max, [0.0, 0.0], &spec, Output::EveryStep, |_, y| sup = sup.max(y[1].abs()))?;
    Ok(sup)
}

fn summarize(name: &str, a: f64, trig: Trig, beta: f64, x0_list: &[f64], x_max: f64, sups: Vec<f64>) -> OscCheck {
    let products: Vec<f64> = sups.iter().zip(x0_list).map(|(s, x)| s * x.powf(beta)).collect();
    let max = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = products.iter().copied().fold(f64::INFINITY, f64::min);
    OscCheck {
        name: name.to_string(),
        a,
        trig,
        beta,
        x0_list: x0_list.to_vec(),
        x_max,
        growth: products[products.len() - 1] / products[0],
        sup_integral: sups,
        products,
        spread: max / min,
        limit: SPREAD_LIMIT,
    }
}

/// `theta' = a + 1/(1 + x^beta1)` and the integrand `trig(theta)/x^beta2`;
/// reports `I(x0) x0^beta` with `beta = min(beta2, beta1 + beta2 - 1, 2 beta2 - 1)`.
pub fn oscillatory_check_41(
    a: f64,
    beta1: f64,
    beta2: f64,
    trig: Trig,
    x0_list: &[f64],
    x_max: f64,
    spec: &IntegratorSpec,
) -> Result<OscCheck> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::HypothesisViolated("a must be non-zero".into()));
    }
    if !(beta1 > 0.0 && beta2 > 0.0) {
        return Err(Error::HypothesisViolated("beta1 and beta2 must be positive".into()));
    }
    if !(beta1 + beta2 > 1.0) {
        return Err(Error::HypothesisViolated("beta1 + beta2 must exceed 1".into()));
    }
    if !(beta2 > 0.5) {
        return Err(Error::HypothesisViolated("beta2 must exceed 1/2".into()));
    }
    validate_range(x0_list, x_max)?;
    let beta = beta2.min(beta1 + beta2 - 1.0).min(2.0 * beta2 - 1.0);
    let sups = x0_list
        .par_iter()
        .map(|&x0| {
            sup_integral(
                a,
                |x| 1.0 / (1.0 + x.powf(beta1)),
                |x| x.powf(-beta2),
                trig,
                x0,
                x_max,
                spec,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("oscillatory_41", a, trig, beta, x0_list, x_max, sups))
}

/// `theta' = a + gamma'(x) + 1/x` and the integrand `Gamma(t) trig(theta)/t`,
/// reporting `I(x0) x0`. Rejects `a` within [`RESONANCE_DISTANCE`] of `2 pi Z`.
pub fn oscillatory_check_42<G, D>(
    big_gamma: G,
    gamma_prime: D,
    a: f64,
    trig: Trig,
    x0_list: &[f64],
    x_max: f64,
    spec: &IntegratorSpec,
) -> Result<OscCheck>
where
    G: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    if distance_to_resonance(a) < RESONANCE_DISTANCE {
        return Err(Error::ResonantFrequency { a });
    }
    oscillatory_check_42_unchecked(big_gamma, gamma_prime, a, trig, x0_list, x_max, spec)
}

/// [`oscillatory_check_42`] without the resonance guard, for control runs.
pub fn oscillatory_check_42_unchecked<G, D>(
    big_gamma: G,
    gamma_prime: D,
    a: f64,
    trig: Trig,
    x0_list: &[f64],
    x_max: f64,
    spec: &IntegratorSpec,
) -> Result<OscCheck>
where
    G: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    if !a.is_finite() {
        return Err(invalid("a", "must be finite"));
    }
    validate_range(x0_list, x_max)?;
    let sups = x0_list
        .par_iter()
        .map(|&x0| {
            sup_integral(
                a,
                |x| gamma_prime(x) + 1.0 / x,
                |x| big_gamma(x) / x,
                trig,
                x0,
                x_max,
                spec,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("oscillatory_42", a, trig, 1.0, x0_list, x_max, sups))
}

/// The doubled-phase integral of a target: `a = 4k`, `gamma = 2 delta`, `Gamma = Psi`.
pub fn oscillatory_check_target(
    target: &EmbeddingTarget,
    trig: Trig,
    x0_list: &[f64],
    x_max: f64,
    spec: &IntegratorSpec,
) -> Result<OscCheck> {
    let sol = &*target.floquet;
    let two_k = 2.0 * sol.k;
    let mut r = oscillatory_check_42(
        |x| sol.xi_coefficients(x).1,
        |x| 2.0 * (sol.xi_coefficients(x).2 - two_k),
        2.0 * two_k,
        trig,
        x0_list,
        x_max,
        spec,
    )?;
    r.name = "oscillatory_42_target".into();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    const X0: [f64; 3] = [1e2, 1e3, 1e4];

    #[test]
    fn hypotheses() {
        let s = IntegratorSpec::default();
        for (a, b1, b2) in [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 0.3, 0.6), (1.0, 1.0, 0.5)] {
            assert!(matches!(
                oscillatory_check_41(a, b1, b2, Trig::Sin, &X0, 1e5, &s),
                Err(Error::HypothesisViolated(_))
            ));
        }
        assert!(matches!(
            oscillatory_check_42(|_| 1.0, |_| 0.0, TAU * 3.0 + 5e-4, Trig::Sin, &X0, 1e5, &s),
            Err(Error::ResonantFrequency { .. })
        ));
    }

    #[test]
    fn zero_gamma_gives_zero() {
        let r = oscillatory_check_42(|_| 0.0, |_| 0.0, 2.0, Trig::Sin, &[10.0], 1e3, &IntegratorSpec::default())
            .unwrap();
        assert_eq!(r.sup_integral, vec![0.0]);
    }

    #[test]
    fn first_lemma_short_range() {
        // For x0 >> 1 the sup is close to the first half-oscillation, about 2/(a x0).
        let r = oscillatory_check_41(2.0, 1.0, 1.0, Trig::Sin, &[1e2, 1e3], 1e4, &IntegratorSpec::default()).unwrap();
        assert_eq!(r.beta, 1.0);
        for p in &r.products {
            assert!((p - 1.0).abs() < 0.05, "{p}");
        }
        assert!(r.passed());
    }
}
