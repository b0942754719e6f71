use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::track::{run_solution, Drive};
use crate::error::{Error, Result};
use crate::integrate::{IntegratorSpec, Output};
use crate::synth::{resonance_violation, EmbeddingTarget, PieceField, PieceSpec};

pub const DEFAULT_PHASES: usize = 8;
pub const STABILITY_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub lambda: f64,
    pub lambda_j: f64,
    pub x0: f64,
    pub x1: f64,
    /// `sup R_j(x) / R_j(x0)` per initial phase `eta0 = pi i / phases`.
    pub ratios: Vec<f64>,
    pub worst_ratio: f64,
    pub worst_x: f64,
    pub worst_phase: f64,
    pub limit: f64,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= self.limit
    }

    pub fn verdict(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::StabilityViolated {
                ratio: self.worst_ratio,
                x: self.worst_x,
                phase: self.worst_phase,
            })
        }
    }
}

/// Worst growth of the bystander's solutions over `[x0, x1]` under `drive`,
/// across `phases` initial phases `eta0` in `[0, pi)` (which covers every
/// solution up to sign).
pub fn stability_scan(
    bystander: &EmbeddingTarget,
    drive: Drive<'_>,
    x0: f64,
    x1: f64,
    phases: usize,
    spec: &IntegratorSpec,
) -> Result<Vec<(f64, f64)>> {
    let sol = &*bystander.floquet;
    let arg_f = sol.frame(x0).arg_f;
    let xi_v0 = match drive {
        Drive::Piece(f) => f.spec.xi0,
        _ => 0.0,
    };
    (0..phases)
        .into_par_iter()
        .map(|i| {
            let eta0 = PI * i as f64 / phases as f64;
            let mut best = (0.0f64, x0);
            run_solution(
                sol,
                drive,
                false,
                x0,
                x1,
                [xi_v0, 2.0 * eta0 + arg_f, 0.0, 0.0],
                spec,
                Output::EveryStep,
                |x, y| {
                    if y[2] > best.0 {
                        best = (y[2], x);
                    }
                },
            )?;
            Ok((best.0.exp(), best.1))
        })
        .collect()
}

/// Growth of a bystander target's solutions across a piece built for `owner`.
pub fn stability_check(
    owner: &EmbeddingTarget,
    bystander: &EmbeddingTarget,
    piece: &PieceSpec,
    phases: usize,
    resonance_margin: f64,
    spec: &IntegratorSpec,
) -> Result<StabilityReport> {
    if let Some(e) = resonance_violation(&[owner.k, bystander.k], resonance_margin) {
        if !matches!(e, Error::ResonantPair { i, j, .. } if i == j) {
            return Err(e);
        }
    }
    piece.validate(owner.k)?;
    let field = PieceField::new(piece, &owner.floquet);
    let (x0, x1) = (piece.start_x(), piece.end_x());
    let scan = stability_scan(bystander, Drive::Piece(field), x0, x1, phases, spec)?;
    let (iw, &(worst_ratio, worst_x)) = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("at least one phase");
    Ok(StabilityReport {
        lambda: owner.lambda,
        lambda_j: bystander.lambda,
        x0,
        x1,
        ratios: scan.iter().map(|s| s.0).collect(),
        worst_ratio,
        worst_x,
        worst_phase: PI * iw as f64 / phases as f64,
        limit: STABILITY_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::Coefficients;
    use crate::synth::{check_nonresonance, Side};

    fn targets(ls: &[f64]) -> Vec<EmbeddingTarget> {
        check_nonresonance(ls, &Coefficients::free(), 0.0, 0.05, 5.0, &IntegratorSpec::default()).unwrap()
    }

    fn piece() -> PieceSpec {
        PieceSpec {
            side: Side::Plus,
            target: 0,
            lambda: 0.7,
            a: 1e4,
            b: 0.0,
            x_end: 2.8e4,
            xi0: PI / 2.0,
            c: 210.0,
            taper_width: 1.0,
            active_count: 2,
        }
    }

    #[test]
    fn bystander_is_stable() {
        let t = targets(&[0.7, 1.3]);
        let r = stability_check(&t[0], &t[1], &piece(), 8, 0.02, &IntegratorSpec::default()).unwrap();
        assert!(r.passed(), "{}", r.worst_ratio);
        assert!(r.worst_ratio >= 1.0);
        assert_eq!(r.ratios.len(), 8);
    }

    #[test]
    fn zero_drive_ratio_is_one() {
        let t = targets(&[1.3]);
        let s = stability_scan(&t[0], Drive::Free, 100.0, 1000.0, 8, &IntegratorSpec::default()).unwrap();
        assert!(s.iter().all(|r| r.0 == 1.0));
    }

    #[test]
    fn refuses_resonant_pair() {
        let t = targets(&[0.7, 0.7]);
        assert!(matches!(
            stability_check(&t[0], &t[1], &piece(), 8, 0.02, &IntegratorSpec::default()),
            Err(Error::ResonantPair { .. })
        ));
    }
}
