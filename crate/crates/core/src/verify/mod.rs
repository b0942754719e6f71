//! Numerical checks of the decay, stability, tail and lower-bound estimates.

mod decay;
mod nonembedding;
mod oscillatory;
mod report;
mod stability;
mod tail;
pub mod track;

pub use decay::{decay_check, decay_fit, slope_limit, DecayFit, DecayReport, DECAY_SAMPLES, DUAL_PATH_TOLERANCE};
pub use nonembedding::{
    adversarial_nonembedding, adversarial_piece, nonembedding_check, theorem_constant, NonEmbeddingReport,
    DEFAULT_BOUND_FACTOR,
};
pub use oscillatory::{
    distance_to_resonance, oscillatory_check_41, oscillatory_check_42, oscillatory_check_42_unchecked,
    oscillatory_check_target, OscCheck, Trig, RESONANCE_DISTANCE, SPREAD_LIMIT,
};
pub use report::{write_reports_json, write_summary_csv, CheckReport};
pub use stability::{stability_check, stability_scan, StabilityReport, DEFAULT_PHASES, STABILITY_LIMIT};
pub use tail::{cycle_ratios, l2_tail_estimate, log_sum_exp, CycleSum, TailReport, MIN_CYCLES, TAIL_RATIO_LIMIT};
pub use track::{advance, run_solution, Drive, PieceTrack, TargetState, LOCK_TOLERANCE};

use rayon::prelude::*;
use serde_json::json;

use crate::error::Result;
use crate::synth::{EmbeddingTarget, PieceSpec, ScheduleOptions, Side, SynthesizedPotential};

/// Tracks every target across `pieces` on both sides, starting each target at
/// `xi_init` with `ln R = 0`. Returned tracks follow the order of `pieces`.
pub fn track_pieces(
    targets: &[EmbeddingTarget],
    pieces: &[PieceSpec],
    opts: &ScheduleOptions,
) -> Result<Vec<PieceTrack>> {
    let run = |side: Side| -> Result<Vec<PieceTrack>> {
        let mut order: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i].side == side).collect();
        order.sort_by(|&i, &j| pieces[i].a.total_cmp(&pieces[j].a));
        let mut states = vec![
            TargetState {
                xi: opts.xi_init,
                ln_r: 0.0,
            };
            targets.len()
        ];
        let mut out = Vec::new();
        for i in order {
            out.extend(advance(
                targets,
                &mut states,
                &pieces[i],
                i,
                &opts.integrator,
                opts.envelope(),
                opts.lock_tolerance,
            )?);
        }
        Ok(out)
    };
    let (plus, minus) = rayon::join(|| run(Side::Plus), || run(Side::Minus));
    let mut all = plus?;
    all.extend(minus?);
    all.sort_by_key(|t| (t.piece, t.target));
    Ok(all)
}

/// Knobs of the verification suite that are not part of the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub resonance_margin: f64,
    pub phases: usize,
    pub sample_stride: f64,
    pub max_samples_per_piece: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            resonance_margin: crate::synth::DEFAULT_RESONANCE_MARGIN,
            phases: DEFAULT_PHASES,
            sample_stride: 1.0,
            max_samples_per_piece: 20_000,
        }
    }
}

/// Runs the checks for a synthesized potential: decay and bystander stability on
/// each target's first piece per side, the sampled envelope, and the L² tail of
/// every target on both sides. Decay is measured against the constant implied
/// by `opts`, not the one stored in the manifest.
pub fn verify_synthesis(
    potential: &SynthesizedPotential,
    targets: &[EmbeddingTarget],
    opts: &ScheduleOptions,
    vopts: &VerifyOptions,
) -> Result<Vec<CheckReport>> {
    let pieces = &potential.manifest.pieces;
    let mut firsts: Vec<usize> = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        for t in 0..targets.len() {
            if let Some(i) = (0..pieces.len())
                .filter(|&i| pieces[i].side == side && pieces[i].target == t)
                .min_by(|&i, &j| pieces[i].a.total_cmp(&pieces[j].a))
            {
                firsts.push(i);
            }
        }
    }
    let mut reports: Vec<CheckReport> = firsts
        .par_iter()
        .map(|&i| {
            let p = &pieces[i];
            let owner = &targets[p.target];
            let expected = opts.constant(owner, p.active_count);
            let mut r = match decay_check(owner, p, expected, opts.decay_margin, &opts.integrator) {
                Ok(r) => r,
                Err(e) => return CheckReport::failed(format!("decay/{}/{}/{}", p.side, p.lambda, p.a), &e),
            };
            for (j, by) in targets.iter().enumerate() {
                if j == p.target {
                    continue;
                }
                match stability_check(owner, by, p, vopts.phases, vopts.resonance_margin, &opts.integrator) {
                    Ok(s) => r.bystanders.push(s),
                    Err(e) => return CheckReport::failed(format!("stability/{}/{}", p.lambda, by.lambda), &e),
                }
            }
            CheckReport::from(&r)
        })
        .collect();

    let samples = potential.samples(vopts.sample_stride, vopts.max_samples_per_piece)?;
    reports.push(CheckReport::bound(
        "envelope",
        "max_ratio",
        potential.envelope_ratio(&samples),
        1.0 + 1e-12,
        json!({ "samples": samples.len() }),
    ));
    if let Some(env) = opts.envelope() {
        let worst = samples
            .iter()
            .map(|&(x, v)| v.abs() * (1.0 + x.abs()) / env.h(x))
            .fold(0.0, f64::max);
        reports.push(CheckReport::bound(
            "growth_envelope",
            "max_ratio",
            worst,
            1.0,
            json!({ "envelope": env, "samples": samples.len() }),
        ));
    }

    match track_pieces(targets, pieces, opts) {
        Ok(tracks) => {
            for side in [Side::Plus, Side::Minus] {
                for t in 0..targets.len() {
                    let mine: Vec<PieceTrack> = tracks
                        .iter()
                        .filter(|tr| tr.target == t && pieces[tr.piece].side == side)
                        .cloned()
                        .collect();
                    let mut mine = mine;
                    mine.sort_by(|a, b| a.start.abs().total_cmp(&b.start.abs()));
                    match l2_tail_estimate(t, side, &mine) {
                        Ok(r) => reports.push(CheckReport::from(&r)),
                        Err(e) => reports.push(CheckReport::failed(format!("l2_tail/{t}/{side}"), &e)),
                    }
                }
            }
        }
        Err(e) => reports.push(CheckReport::failed("l2_tail", &e)),
    }
    Ok(reports)
}
