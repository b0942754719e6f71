use serde::{Deserialize, Serialize};

use super::track::{run_solution, Drive};
use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorSpec, Output};
use crate::synth::{EmbeddingTarget, PieceField, PieceSpec, Side};

/// Lower-bound factor used when none is given.
pub const DEFAULT_BOUND_FACTOR: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonEmbeddingReport {
    pub lambda: f64,
    pub epsilon: f64,
    /// Constant with `|g_1|^2 + |g_2|^2 <= |omega| C` on the period.
    pub c_bound: f64,
    pub x0: f64,
    pub x_max: f64,
    pub factor: f64,
    /// `min R(x) (x/x0)^{C eps} / R(x0)`.
    pub min_ratio: f64,
    pub worst_x: f64,
    pub ln_r_end: f64,
    /// `ln ∫ R^2 / R(x0)^2` over `[x0, x_max]`.
    pub ln_int_r2: f64,
    /// `ln` of the same integral for the extremal profile `(x/x0)^{-C eps}`.
    pub ln_lower_bound: f64,
}

impl NonEmbeddingReport {
    pub fn passed(&self) -> bool {
        self.min_ratio >= self.factor
    }

    pub fn verdict(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::BoundViolated {
                x: self.worst_x,
                ratio: self.min_ratio,
                bound: self.factor,
            })
        }
    }

    /// Whether `∫ R^2` is at least the lower bound from the decay estimate.
    pub fn not_square_summable(&self) -> bool {
        self.ln_int_r2 >= self.ln_lower_bound + 2.0 * self.factor.ln()
    }
}

/// `C` with `|g_1|^2 + |g_2|^2 < |omega| C`.
pub fn theorem_constant(target: &EmbeddingTarget) -> f64 {
    target.floquet.max_abs2_sum() / target.omega.abs() * (1.0 + 1e-6)
}

/// Untapered phase-locked piece on `[x0, x_max]` with `|V| <= eps / x`, the
/// perturbation pushing `R` down as fast as the envelope allows.
pub fn adversarial_piece(target: &EmbeddingTarget, epsilon: f64, x0: f64, x_max: f64, xi0: f64) -> PieceSpec {
    PieceSpec {
        side: Side::Plus,
        target: 0,
        lambda: target.lambda,
        a: x0,
        b: 0.0,
        x_end: x_max,
        xi0,
        c: epsilon / target.omega.abs(),
        taper_width: 0.0,
        active_count: 1,
    }
}

/// Integrates `R` for `target` on `[x0, x_max]` under `drive` (with `|V| <= eps/x`)
/// and compares with `R(x0) (x/x0)^{-C eps}`.
#[allow(clippy::too_many_arguments)]
pub fn nonembedding_check(
    target: &EmbeddingTarget,
    drive: Drive<'_>,
    locked: bool,
    epsilon: f64,
    x0: f64,
    x_max: f64,
    factor: f64,
    xi0: f64,
    spec: &IntegratorSpec,
) -> Result<NonEmbeddingReport> {
    if !(x0 > 0.0 && x_max > x0) {
        return Err(invalid("x0", "need 0 < x0 < x_max"));
    }
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon", "must be non-negative"));
    }
    let c = theorem_constant(target);
    let ce = c * epsilon;
    if ce >= 0.5 {
        return Err(Error::HypothesisViolated(format!("C eps = {ce} must be below 1/2")));
    }
    let xi_v0 = match drive {
        Drive::Piece(f) => f.spec.xi0,
        _ => xi0,
    };
    let mut min = (f64::INFINITY, x0);
    let end = run_solution(
        &target.floquet,
        drive,
        locked,
        x0,
        x_max,
        [xi_v0, xi0, 0.0, 0.0],
        spec,
        Output::EveryStep,
        |x, y| {
            let r = y[2] + ce * (x / x0).ln();
            if r < min.0 {
                min = (r, x);
            }
        },
    )?;
    let e = 1.0 - 2.0 * ce;
    let ln_lower_bound = x0.ln() - e.ln() + ((x_max / x0).powf(e) - 1.0).ln();
    Ok(NonEmbeddingReport {
        lambda: target.lambda,
        epsilon,
        c_bound: c,
        x0,
        x_max,
        factor,
        min_ratio: min.0.exp(),
        worst_x: min.1,
        ln_r_end: end[2],
        ln_int_r2: end[3].ln(),
        ln_lower_bound,
    })
}

/// The adversarial check at `C eps = c_eps`.
pub fn adversarial_nonembedding(
    target: &EmbeddingTarget,
    c_eps: f64,
    x0: f64,
    x_max: f64,
    factor: f64,
    spec: &IntegratorSpec,
) -> Result<NonEmbeddingReport> {
    let eps = c_eps / theorem_constant(target);
    let piece = adversarial_piece(target, eps, x0, x_max, std::f64::consts::FRAC_PI_2);
    let field = PieceField::new(&piece, &target.floquet);
    nonembedding_check(target, Drive::Piece(field), true, eps, x0, x_max, factor, piece.xi0, spec)
}
