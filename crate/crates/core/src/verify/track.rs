//! Integration of `(xi, ln R)` for one Floquet frame under a given perturbation.
//!
//! State layout: `[xi_V, xi, ln R, J]`, where `xi_V` is the phase carried by a
//! synthesized piece (unused otherwise) and `J` accumulates
//! `∫ exp(2 (ln R - ln R_start))` outward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::FloquetSolution;
use crate::integrate::{solve, IntegratorSpec, Output};
use crate::periodic::Potential;
use crate::pruefer::{r_xi_rhs, wrap};
use crate::synth::{EmbeddingTarget, Envelope, PieceField, PieceSpec};

/// Default tolerance below which a target is treated as phase-locked to its own piece.
pub const LOCK_TOLERANCE: f64 = 1e-6;

/// What drives the tracked solution.
#[derive(Clone, Copy)]
pub enum Drive<'a> {
    Free,
    Function(&'a dyn Potential),
    /// A synthesized piece whose own phase is co-integrated.
    Piece(PieceField<'a>),
}

impl Drive<'_> {
    #[inline]
    fn potential(&self, x: f64, xi_v: f64) -> (f64, f64) {
        match self {
            Drive::Free => (0.0, 0.0),
            Drive::Function(v) => (v.value(x), 0.0),
            Drive::Piece(field) => {
                let (dxi, v, _, _) = field.eval(x, xi_v);
                (v, dxi)
            }
        }
    }

    /// Potential at `(x, xi_V)`.
    pub fn value(&self, x: f64, xi_v: f64) -> f64 {
        match self {
            Drive::Free => 0.0,
            Drive::Function(v) => v.value(x),
            Drive::Piece(field) => field.potential(x, xi_v),
        }
    }
}

/// Integrates the tracked solution from `x0` to `x1`.
///
/// With `locked` the solution is taken to share the piece's phase
/// (`xi - xi_V` constant) and `ln R` is obtained by quadrature along `xi_V`.
/// Phases are integrated relative to their mean drift so the relative
/// tolerance acts on a bounded quantity.
#[allow(clippy::too_many_arguments)]
pub fn run_solution<F: FnMut(f64, &[f64; 4])>(
    sol: &FloquetSolution,
    drive: Drive<'_>,
    locked: bool,
    x0: f64,
    x1: f64,
    init: [f64; 4],
    spec: &IntegratorSpec,
    output: Output,
    mut observe: F,
) -> Result<[f64; 4]> {
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let ln_r0 = init[2];
    let s_own = sol.arg_f_drift();
    let s_v = match drive {
        Drive::Piece(field) => field.sol.arg_f_drift(),
        _ => 0.0,
    };
    let full = move |x: f64, z: &[f64; 4]| {
        let t = x - x0;
        [z[0] + init[0] + s_v * t, z[1] + init[1] + s_own * t, z[2], z[3]]
    };
    let f = |x: f64, z: &[f64; 4], d: &mut [f64; 4]| {
        let y = full(x, z);
        let growth = dir * (2.0 * (y[2] - ln_r0)).exp();
        match (&drive, locked) {
            (Drive::Piece(field), true) => {
                let (dxi, _, psi, kappa) = field.eval(x, y[0]);
                let s = y[0].sin();
                *d = [dxi - s_v, dxi - s_own, -kappa * psi * s * s, growth];
            }
            _ => {
                let (v, dxi_v) = drive.potential(x, y[0]);
                let (dlr, dxi) = r_xi_rhs(y[1], v, sol, x);
                *d = [dxi_v - s_v, dxi - s_own, dlr, growth];
            }
        }
    };
    let z0 = [0.0, 0.0, init[2], init[3]];
    let (z, _) = solve(&f, x0, x1, z0, spec, output, |x, z| observe(x, &full(x, z)))?;
    Ok(full(x1, &z))
}

/// Current `(xi, ln R)` of one target's solution on one half-line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub xi: f64,
    pub ln_r: f64,
}

/// What happened to one target's solution across one piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceTrack {
    pub piece: usize,
    pub owner: usize,
    pub target: usize,
    pub start: f64,
    pub end: f64,
    pub xi_start: f64,
    pub xi_end: f64,
    pub ln_r_start: f64,
    pub ln_r_end: f64,
    pub ln_r_max: f64,
    /// `ln ∫ R^2` over the piece.
    pub ln_int_r2: f64,
    pub locked: bool,
    pub phase_mismatch: f64,
    /// `max |V| |±x - b|` over accepted steps.
    pub envelope_max: f64,
    /// `max |V| (1 + |x|) / h(x)` when an envelope is given.
    pub h_ratio_max: f64,
}

/// Advances every target across one piece (in parallel) and updates `states`.
pub fn advance(
    targets: &[EmbeddingTarget],
    states: &mut [TargetState],
    piece: &PieceSpec,
    piece_index: usize,
    spec: &IntegratorSpec,
    envelope: Option<Envelope>,
    lock_tolerance: f64,
) -> Result<Vec<PieceTrack>> {
    let owner = &targets[piece.target];
    piece.validate(owner.k)?;
    let field = PieceField::new(piece, &owner.floquet);
    states
        .par_iter_mut()
        .enumerate()
        .map(|(j, st)| {
            let mismatch = if j == piece.target {
                wrap(st.xi - piece.xi0)
            } else {
                f64::NAN
            };
            let locked = j == piece.target && mismatch.abs() <= lock_tolerance;
            let (x0, x1) = (piece.start_x(), piece.end_x());
            let mut ln_r_max = st.ln_r;
            let mut env_max: f64 = 0.0;
            let mut h_max: f64 = 0.0;
            let init = [piece.xi0, st.xi, st.ln_r, 0.0];
            let y = run_solution(
                &targets[j].floquet,
                Drive::Piece(field),
                locked,
                x0,
                x1,
                init,
                spec,
                Output::EveryStep,
                |x, y| {
                    ln_r_max = ln_r_max.max(y[2]);
                    let v = field.potential(x, y[0]).abs();
                    env_max = env_max.max(v * piece.outward_distance(x).abs());
                    if let Some(h) = envelope {
                        h_max = h_max.max(v * (1.0 + x.abs()) / h.h(x));
                    }
                },
            )?;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { x: x1 });
            }
            let track = PieceTrack {
                piece: piece_index,
                owner: piece.target,
                target: j,
                start: x0,
                end: x1,
                xi_start: st.xi,
                xi_end: y[1],
                ln_r_start: st.ln_r,
                ln_r_end: y[2],
                ln_r_max,
                ln_int_r2: 2.0 * st.ln_r + y[3].ln(),
                locked,
                phase_mismatch: mismatch,
                envelope_max: env_max,
                h_ratio_max: h_max,
            };
            st.xi = y[1];
            st.ln_r = y[2];
            Ok(track)
        })
        .collect()
}
