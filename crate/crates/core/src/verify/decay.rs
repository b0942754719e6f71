use serde::{Deserialize, Serialize};

use super::stability::StabilityReport;
use super::track::{run_solution, Drive};
use crate::error::{invalid, Error, Result};
use crate::integrate::{solve, IntegratorSpec, Output};
use crate::periodic::RealState2;
use crate::pruefer::{from_prufer, to_prufer, PrueferState};
use crate::synth::{EmbeddingTarget, PieceField, PieceSpec, NOMINAL_EXPONENT};

/// Fit samples per piece.
pub const DECAY_SAMPLES: usize = 400;
/// Required agreement of the two amplitude computations.
pub const DUAL_PATH_TOLERANCE: f64 = 1e-6;

/// Least-squares line `ln R = intercept + slope u` with `u = ln((±x - b)/(a - b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max (ln R + exponent u)` over the samples.
    pub additive_constant: f64,
    pub monotone: bool,
}

/// Fits `samples` of `(x, ln R)` on a piece.
pub fn decay_fit(samples: &[(f64, f64)], piece: &PieceSpec, exponent: f64) -> Result<DecayFit> {
    if samples.len() < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let d0 = piece.a - piece.b;
    let us: Vec<f64> = samples.iter().map(|&(x, _)| (piece.outward_distance(x) / d0).ln()).collect();
    let n = samples.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let ml = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (u, &(_, l)) in us.iter().zip(samples) {
        sxx += (u - mu) * (u - mu);
        sxy += (u - mu) * (l - ml);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let additive_constant = us
        .iter()
        .zip(samples)
        .map(|(u, &(_, l))| l + exponent * u)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut running = f64::NEG_INFINITY;
    let mut monotone = true;
    for &(_, l) in samples {
        if l > running.max(samples[0].1) + 1e-9 {
            monotone = false;
        }
        running = running.max(l);
    }
    Ok(DecayFit {
        slope,
        intercept: ml - slope * mu,
        additive_constant,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub lambda: f64,
    pub piece: PieceSpec,
    pub expected_c: f64,
    pub samples: Vec<(f64, f64)>,
    pub fit: DecayFit,
    pub slope_limit: f64,
    /// Measured `C_bound` for the exponent in `exponent`.
    pub c_bound: f64,
    pub exponent: f64,
    pub dual_path_error: f64,
    pub bystanders: Vec<StabilityReport>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.verdict().is_ok()
    }

    pub fn verdict(&self) -> Result<()> {
        if !(self.fit.slope <= self.slope_limit) || !self.fit.monotone {
            return Err(Error::DecayTooSlow {
                slope: self.fit.slope,
                limit: self.slope_limit,
            });
        }
        if !(self.dual_path_error <= DUAL_PATH_TOLERANCE) {
            return Err(Error::HypothesisViolated(format!(
                "amplitude paths disagree by {:.3e}",
                self.dual_path_error
            )));
        }
        for b in &self.bystanders {
            b.verdict()?;
        }
        Ok(())
    }
}

/// Slope the decay of a piece must reach: the leading rate for `expected_c`
/// scaled by `(100 - margin) / (100 + margin)`.
pub fn slope_limit(target: &EmbeddingTarget, expected_c: f64, decay_margin: f64) -> f64 {
    -target.decay_exponent(expected_c) * (NOMINAL_EXPONENT - decay_margin) / (NOMINAL_EXPONENT + decay_margin)
}

/// Amplitude of the phase-locked solution across `piece` from `R(a) = 1`, its
/// fitted decay slope, measured `C_bound`, and an independent check of the
/// amplitude by integrating the perturbed system backwards.
pub fn decay_check(
    target: &EmbeddingTarget,
    piece: &PieceSpec,
    expected_c: f64,
    decay_margin: f64,
    spec: &IntegratorSpec,
) -> Result<DecayReport> {
    piece.validate(target.k)?;
    let sol = &*target.floquet;
    let field = PieceField::new(piece, sol);
    let (x0, x1) = (piece.start_x(), piece.end_x());
    let h = (piece.x_end - piece.a) / DECAY_SAMPLES as f64;
    let mut samples = Vec::with_capacity(DECAY_SAMPLES + 1);
    let end = run_solution(
        sol,
        Drive::Piece(field),
        true,
        x0,
        x1,
        [piece.xi0, piece.xi0, 0.0, 0.0],
        spec,
        Output::Uniform(h),
        |x, y| samples.push((x, y[2])),
    )?;
    let exponent = target.decay_exponent(expected_c) * NOMINAL_EXPONENT / (NOMINAL_EXPONENT + decay_margin);
    let fit = decay_fit(&samples, piece, exponent)?;
    let c_bound = fit.additive_constant.exp();

    let (xi_end, ln_r_end) = (end[0], end[2]);
    let y_end = from_prufer(&PrueferState::from_r_xi(1.0, xi_end, sol, x1), sol, x1);
    let coeffs = sol.coefficients();
    let f = |x: f64, s: &[f64; 4], d: &mut [f64; 4]| {
        let (dxi, v, psi, kappa) = field.eval(x, s[2]);
        let (p, q) = coeffs.eval(x);
        let dy = crate::periodic::dirac_rhs(sol.lambda, p + v, q, [s[0], s[1]]);
        let sn = s[2].sin();
        *d = [dy[0], dy[1], dxi, -kappa * psi * sn * sn];
    };
    let mut eta = None;
    let mut err: f64 = 0.0;
    let mut failure = None;
    solve(
        &f,
        x1,
        x0,
        [y_end.y1, y_end.y2, xi_end, ln_r_end],
        spec,
        Output::Uniform(h),
        |x, s| match to_prufer(RealState2::new(s[0], s[1]), sol, x, eta) {
            Ok(st) => {
                eta = Some(st.eta);
                err = err.max((st.r.ln() + ln_r_end - s[3]).abs());
            }
            Err(e) => failure = Some(e),
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }

    Ok(DecayReport {
        lambda: target.lambda,
        piece: piece.clone(),
        expected_c,
        samples,
        fit,
        slope_limit: slope_limit(target, expected_c, decay_margin),
        c_bound,
        exponent,
        dual_path_error: err,
        bystanders: Vec::new(),
    })
}
