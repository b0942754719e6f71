//! Phase-locked decaying perturbations and their round-robin scheduling.

mod assemble;
mod piece;
mod schedule;

pub use assemble::{assemble, write_potential_csv, Manifest, SynthesizedPotential, DEFAULT_CHECKPOINT_SPACING};
pub use piece::{
    piece_potential, smooth_compact, smooth_step, solve_xi, window, PieceField, PieceSpec, PotentialPiece, Side,
    XiTrajectory,
};
pub use schedule::{
    probe_c_bound, probe_separation, schedule, Envelope, ProbeRecord, ScheduleMode, ScheduleOptions, SynthesisSchedule,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, ResonanceKind, Result};
use crate::floquet::{derived_data, floquet_solution_with_margin, DerivedPeriodicData, FloquetSolution};
use crate::integrate::IntegratorSpec;
use crate::periodic::Coefficients;

/// Target decay exponent of a single piece.
pub const NOMINAL_EXPONENT: f64 = 100.0;
pub const DEFAULT_DECAY_MARGIN: f64 = 5.0;
pub const DEFAULT_RESONANCE_MARGIN: f64 = 0.02;

/// A prescribed eigenvalue together with its Floquet data.
#[derive(Debug, Clone)]
pub struct EmbeddingTarget {
    pub lambda: f64,
    pub k: f64,
    pub omega: f64,
    /// Decay constant used in finite mode.
    pub c: f64,
    pub floquet: Arc<FloquetSolution>,
    pub data: Arc<DerivedPeriodicData>,
}

impl EmbeddingTarget {
    pub fn new(sol: FloquetSolution, decay_margin: f64) -> Self {
        let data = derived_data(&sol);
        Self {
            lambda: sol.lambda,
            k: sol.k,
            omega: sol.omega,
            c: choose_c(sol.psi_mean(), decay_margin),
            floquet: Arc::new(sol),
            data: Arc::new(data),
        }
    }

    pub fn psi_mean(&self) -> f64 {
        self.floquet.psi_mean()
    }

    /// Leading decay exponent `C Psi_mean / 2` produced by a piece with constant `c`.
    pub fn decay_exponent(&self, c: f64) -> f64 {
        0.5 * c * self.psi_mean()
    }
}

/// `C = 2 (100 + margin) / Psi_mean`.
pub fn choose_c(psi_mean: f64, decay_margin: f64) -> f64 {
    2.0 * (NOMINAL_EXPONENT + decay_margin) / psi_mean
}

/// Builds the targets and rejects any pair violating the non-resonance conditions
/// `k_i != k_j`, `k_i + k_j != pi`, `k_i != pi/2` (each with the given margin).
pub fn check_nonresonance(
    lambdas: &[f64],
    coeffs: &Coefficients,
    margin: f64,
    edge_margin: f64,
    decay_margin: f64,
    spec: &IntegratorSpec,
) -> Result<Vec<EmbeddingTarget>> {
    if !(margin >= 0.0) {
        return Err(invalid("resonance_margin", "must be non-negative"));
    }
    if !(decay_margin >= 0.0) {
        return Err(invalid("decay_margin", "must be non-negative"));
    }
    let sols = lambdas
        .par_iter()
        .map(|&l| floquet_solution_with_margin(coeffs, l, spec, edge_margin))
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<f64> = sols.iter().map(|s| s.k).collect();
    resonance_violation(&ks, margin).map_or(Ok(()), Err)?;
    Ok(sols.into_iter().map(|s| EmbeddingTarget::new(s, decay_margin)).collect())
}

/// First violated non-resonance condition among the quasimomenta, if any.
pub fn resonance_violation(ks: &[f64], margin: f64) -> Option<Error> {
    for (i, &ki) in ks.iter().enumerate() {
        if (ki - PI / 2.0).abs() < margin {
            return Some(Error::ResonantPair {
                i,
                j: i,
                kind: ResonanceKind::HalfPi,
            });
        }
        for (j, &kj) in ks.iter().enumerate().skip(i + 1) {
            if (ki - kj).abs() < margin {
                return Some(Error::ResonantPair {
                    i,
                    j,
                    kind: ResonanceKind::EqualQuasimomenta,
                });
            }
            if (ki + kj - PI).abs() < margin {
                return Some(Error::ResonantPair {
                    i,
                    j,
                    kind: ResonanceKind::SumIsPi,
                });
            }
        }
    }
    None
}
