use std::collections::BTreeMap;
use std::f64::consts::{E, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTarget, PieceField, PieceSpec, Side, NOMINAL_EXPONENT};
use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorSpec, Output};
use crate::verify::track::{advance, run_solution, Drive, PieceTrack, TargetState, LOCK_TOLERANCE};

/// Growth bound `h` in growing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// `h(x) = ln(e + |x|)`.
    LogE,
}

impl Envelope {
    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        match self {
            Envelope::LogE => (E + x.abs()).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleMode {
    /// All targets active from the start, each piece with `C = 2(100 + margin)/Psi_mean`.
    Finite,
    /// Targets activated one at a time; with `N` active, each piece has
    /// `|omega| C = c_unit N`, and target `N + 1` is activated once
    /// `h(T_r) >= c_unit (N + 1) safety`.
    Growing { c_unit: f64, safety: f64, envelope: Envelope },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleOptions {
    pub mode: ScheduleMode,
    pub a0: f64,
    pub b: f64,
    pub x_max: f64,
    pub taper_width: f64,
    pub xi_init: f64,
    pub decay_margin: f64,
    /// Complete round-robin cycles required per target.
    pub cycles: usize,
    pub integrator: IntegratorSpec,
    pub c_bound_safety: f64,
    pub separation_safety: f64,
    pub stability_factor: f64,
    pub lock_tolerance: f64,
    pub probe_phases: usize,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            mode: ScheduleMode::Finite,
            a0: 1e4,
            b: 0.0,
            x_max: 1e7,
            taper_width: 1.0,
            xi_init: PI / 2.0,
            decay_margin: 5.0,
            cycles: 3,
            integrator: IntegratorSpec::default(),
            c_bound_safety: 2.0,
            separation_safety: 2.0,
            stability_factor: 1.5,
            lock_tolerance: LOCK_TOLERANCE,
            probe_phases: 8,
        }
    }
}

impl ScheduleOptions {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(invalid("a0", "must be positive"));
        }
        if !(self.b.abs() < self.a0) {
            return Err(invalid("b", "must satisfy |b| < a0"));
        }
        if !(self.x_max > self.a0) {
            return Err(invalid("x_max", "must exceed a0"));
        }
        if !(self.taper_width >= 0.0) {
            return Err(invalid("taper_width", "must be non-negative"));
        }
        if !self.xi_init.is_finite() {
            return Err(invalid("xi_init", "must be finite"));
        }
        if !(self.decay_margin >= 0.0) {
            return Err(invalid("decay_margin", "must be non-negative"));
        }
        if !(self.c_bound_safety >= 1.0 && self.separation_safety >= 1.0 && self.stability_factor > 1.0) {
            return Err(invalid("safety", "safety factors must be >= 1 and stability_factor > 1"));
        }
        if self.probe_phases == 0 {
            return Err(invalid("probe_phases", "must be positive"));
        }
        if let ScheduleMode::Growing { c_unit, safety, .. } = self.mode {
            if !(c_unit > 0.0 && safety >= 1.0) {
                return Err(invalid("mode", "need c_unit > 0 and safety >= 1"));
            }
        }
        Ok(())
    }

    pub fn envelope(&self) -> Option<Envelope> {
        match self.mode {
            ScheduleMode::Finite => None,
            ScheduleMode::Growing { envelope, .. } => Some(envelope),
        }
    }

    /// Exponent the schedule budgets for: the leading rate scaled by `100 / (100 + margin)`.
    pub fn budget_exponent(&self, target: &EmbeddingTarget, c: f64) -> f64 {
        target.decay_exponent(c) * NOMINAL_EXPONENT / (NOMINAL_EXPONENT + self.decay_margin)
    }

    /// `C` for `target` with `active` targets in play.
    pub fn constant(&self, target: &EmbeddingTarget, active: usize) -> f64 {
        match self.mode {
            ScheduleMode::Finite => target.c,
            ScheduleMode::Growing { c_unit, .. } => c_unit * active as f64 / target.omega.abs(),
        }
    }
}

/// Measured constants for one `(target, active count)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub target: usize,
    pub active_count: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub c_bound: f64,
    pub separation: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisSchedule {
    pub targets: Vec<EmbeddingTarget>,
    pub options: ScheduleOptions,
    /// `T_0 = a0 < T_1 < ...`.
    pub breakpoints: Vec<f64>,
    pub owners: Vec<usize>,
    pub active_counts: Vec<usize>,
    pub probes: Vec<ProbeRecord>,
    /// Plus-side pieces in order, then minus-side pieces in order.
    pub pieces: Vec<PieceSpec>,
    pub tracks: Vec<PieceTrack>,
}

impl SynthesisSchedule {
    pub fn intervals(&self) -> usize {
        self.owners.len()
    }

    pub fn side_pieces(&self, side: Side) -> &[PieceSpec] {
        let n = self.intervals();
        match side {
            Side::Plus => &self.pieces[..n],
            Side::Minus => &self.pieces[n..],
        }
    }

    /// Tracks of `target` on `side`, in outward order.
    pub fn tracks_for(&self, side: Side, target: usize) -> Vec<PieceTrack> {
        self.tracks
            .iter()
            .filter(|t| t.target == target && self.pieces[t.piece].side == side)
            .cloned()
            .collect()
    }
}

/// Measured constant `c_b` with `R(x) <= c_b ((±x-b)/(a-b))^{-e} R(a)` on a probe piece
/// of separation `d` and length `d`, over `phases` initial phases; already multiplied by `safety`.
#[allow(clippy::too_many_arguments)]
pub fn probe_c_bound(
    target: &EmbeddingTarget,
    c: f64,
    exponent: f64,
    b: f64,
    d: f64,
    taper: f64,
    phases: usize,
    safety: f64,
    spec: &IntegratorSpec,
) -> Result<f64> {
    let sups = (0..phases)
        .into_par_iter()
        .map(|i| {
            let piece = PieceSpec {
                side: Side::Plus,
                target: 0,
                lambda: target.lambda,
                a: b + d,
                b,
                x_end: b + 2.0 * d,
                xi0: TAU * i as f64 / phases as f64,
                c,
                taper_width: taper,
                active_count: 1,
            };
            piece.validate(target.k)?;
            let field = PieceField::new(&piece, &target.floquet);
            let mut sup = f64::NEG_INFINITY;
            run_solution(
                &target.floquet,
                Drive::Piece(field),
                true,
                piece.start_x(),
                piece.end_x(),
                [piece.xi0, piece.xi0, 0.0, 0.0],
                spec,
                Output::EveryStep,
                |x, y| sup = sup.max(y[2] + exponent * ((x - b) / d).ln()),
            )?;
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(safety * sups.into_iter().fold(f64::NEG_INFINITY, f64::max).exp())
}

/// Smallest separation `d` (found by doubling) for which every bystander's
/// amplitude stays below `limit` times its initial value across a probe piece on
/// `[b + d, b + 2d]`, times `safety`.
#[allow(clippy::too_many_arguments)]
pub fn probe_separation(
    owner: &EmbeddingTarget,
    bystanders: &[&EmbeddingTarget],
    c: f64,
    b: f64,
    taper: f64,
    limit: f64,
    phases: usize,
    safety: f64,
    spec: &IntegratorSpec,
) -> Result<f64> {
    let mut d = (2.0 * c / owner.k).max(4.0 * taper).max(1.0);
    if bystanders.is_empty() {
        return Ok(safety * d);
    }
    for _ in 0..40 {
        let piece = PieceSpec {
            side: Side::Plus,
            target: 0,
            lambda: owner.lambda,
            a: b + d,
            b,
            x_end: b + 2.0 * d,
            xi0: PI / 2.0,
            c,
            taper_width: taper,
            active_count: 1,
        };
        let field = PieceField::new(&piece, &owner.floquet);
        let jobs: Vec<(usize, usize)> = (0..bystanders.len())
            .flat_map(|j| (0..phases).map(move |p| (j, p)))
            .collect();
        let worst = jobs
            .par_iter()
            .map(|&(j, p)| {
                let sol = &bystanders[j].floquet;
                let eta0 = PI * p as f64 / phases as f64;
                let xi = 2.0 * eta0 + sol.frame(piece.start_x()).arg_f;
                let mut max = 0.0f64;
                run_solution(
                    sol,
                    Drive::Piece(field),
                    false,
                    piece.start_x(),
                    piece.end_x(),
                    [piece.xi0, xi, 0.0, 0.0],
                    spec,
                    Output::EveryStep,
                    |_, y| max = max.max(y[2]),
                )?;
                Ok(max)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        if worst.exp() <= limit {
            return Ok(safety * d);
        }
        d *= 2.0;
    }
    Err(Error::HypothesisViolated(format!(
        "no separation found keeping bystanders below {limit} for lambda = {}",
        owner.lambda
    )))
}

struct Plan {
    breakpoints: Vec<f64>,
    owners: Vec<usize>,
    active_counts: Vec<usize>,
    constants: Vec<f64>,
    probes: Vec<ProbeRecord>,
}

fn plan(targets: &[EmbeddingTarget], opts: &ScheduleOptions) -> Result<Plan> {
    let n_t = targets.len();
    let b = opts.b;
    let mut memo: BTreeMap<(usize, usize), ProbeRecord> = BTreeMap::new();
    let mut plan = Plan {
        breakpoints: vec![opts.a0],
        owners: Vec::new(),
        active_counts: Vec::new(),
        constants: Vec::new(),
        probes: Vec::new(),
    };
    let mut own = vec![0usize; n_t];
    let mut active = match opts.mode {
        ScheduleMode::Finite => n_t,
        ScheduleMode::Growing { .. } => 0,
    };
    let mut ptr = 0usize;
    let mut t = opts.a0;
    loop {
        let owner = match opts.mode {
            ScheduleMode::Finite => {
                let o = ptr;
                ptr = (ptr + 1) % n_t;
                o
            }
            ScheduleMode::Growing {
                c_unit,
                safety,
                envelope,
            } => {
                let h = envelope.h(t);
                if active < n_t && h >= c_unit * (active + 1) as f64 * safety {
                    active += 1;
                    ptr = 0;
                    active - 1
                } else if active == 0 {
                    return Err(Error::EnvelopeViolation {
                        x: t,
                        h,
                        required: c_unit * safety,
                    });
                } else {
                    let o = ptr;
                    ptr = (ptr + 1) % active;
                    o
                }
            }
        };
        let target = &targets[owner];
        let c = opts.constant(target, active);
        let exponent = opts.budget_exponent(target, c);
        let rec = match memo.get(&(owner, active)) {
            Some(r) => r.clone(),
            None => {
                let d = (opts.a0 - b).max(4.0 * c / target.k).max(8.0 * opts.taper_width);
                let c_bound = probe_c_bound(
                    target,
                    c,
                    exponent,
                    b,
                    d,
                    opts.taper_width,
                    opts.probe_phases,
                    opts.c_bound_safety,
                    &opts.integrator,
                )?;
                let others: Vec<&EmbeddingTarget> =
                    targets.iter().enumerate().filter(|(j, _)| *j != owner).map(|(_, t)| t).collect();
                let separation = probe_separation(
                    target,
                    &others,
                    c,
                    b,
                    opts.taper_width,
                    opts.stability_factor,
                    opts.probe_phases,
                    opts.separation_safety,
                    &opts.integrator,
                )?;
                let r = ProbeRecord {
                    target: owner,
                    active_count: active,
                    c,
                    c_bound,
                    separation,
                };
                memo.insert((owner, active), r.clone());
                plan.probes.push(r.clone());
                r
            }
        };
        if t - b < rec.separation {
            return Err(Error::InsufficientSeparation {
                separation: t - b,
                required: rec.separation,
            });
        }
        let budget = 2.0 * rec.c_bound * 2f64.powi(active as i32 - 1);
        let ratio = budget.powf(1.0 / exponent);
        let next = (b + ratio * (t - b)).max(t + 4.0 * opts.taper_width);
        if next > opts.x_max {
            if own.contains(&0) {
                return Err(Error::HorizonTooShort { x_max: opts.x_max });
            }
            break;
        }
        plan.owners.push(owner);
        plan.active_counts.push(active);
        plan.constants.push(c);
        plan.breakpoints.push(next);
        own[owner] += 1;
        t = next;
        if active == n_t && own.iter().all(|&n| n > opts.cycles) {
            break;
        }
    }
    Ok(plan)
}

fn build_side(
    targets: &[EmbeddingTarget],
    opts: &ScheduleOptions,
    plan: &Plan,
    side: Side,
    offset: usize,
) -> Result<(Vec<PieceSpec>, Vec<PieceTrack>)> {
    let mut states = vec![
        TargetState {
            xi: opts.xi_init,
            ln_r: 0.0,
        };
        targets.len()
    ];
    let mut pieces = Vec::with_capacity(plan.owners.len());
    let mut tracks = Vec::new();
    for (r, &owner) in plan.owners.iter().enumerate() {
        let piece = PieceSpec {
            side,
            target: owner,
            lambda: targets[owner].lambda,
            a: plan.breakpoints[r],
            b: opts.b,
            x_end: plan.breakpoints[r + 1],
            xi0: states[owner].xi.rem_euclid(TAU),
            c: plan.constants[r],
            taper_width: opts.taper_width,
            active_count: plan.active_counts[r],
        };
        let tr = advance(
            targets,
            &mut states,
            &piece,
            offset + r,
            &opts.integrator,
            opts.envelope(),
            opts.lock_tolerance,
        )?;
        if let Some(env) = opts.envelope() {
            let worst = tr.iter().map(|t| t.h_ratio_max).fold(0.0, f64::max);
            if worst > 1.0 {
                let h = env.h(piece.start_x());
                return Err(Error::EnvelopeViolation {
                    x: piece.start_x(),
                    h,
                    required: h * worst,
                });
            }
        }
        pieces.push(piece);
        tracks.extend(tr);
    }
    Ok((pieces, tracks))
}

/// Round-robin schedule on `[a0, T_last]` and its mirror image, with every
/// target's solution tracked across every piece.
pub fn schedule(targets: Vec<EmbeddingTarget>, opts: ScheduleOptions) -> Result<SynthesisSchedule> {
    opts.validate()?;
    if targets.is_empty() {
        return Err(invalid("targets", "need at least one target"));
    }
    let plan = plan(&targets, &opts)?;
    let n = plan.owners.len();
    let (plus, minus) = rayon::join(
        || build_side(&targets, &opts, &plan, Side::Plus, 0),
        || build_side(&targets, &opts, &plan, Side::Minus, n),
    );
    let (mut pieces, mut tracks) = plus?;
    let (mp, mt) = minus?;
    pieces.extend(mp);
    tracks.extend(mt);
    Ok(SynthesisSchedule {
        targets,
        options: opts,
        breakpoints: plan.breakpoints,
        owners: plan.owners,
        active_counts: plan.active_counts,
        probes: plan.probes,
        pieces,
        tracks,
    })
}
