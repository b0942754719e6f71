use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::ProbeRecord;
use super::{PieceSpec, PotentialPiece, ScheduleMode, Side, SynthesisSchedule};
use crate::error::{invalid, Error, Result};
use crate::floquet::{floquet_solution_with_margin, FloquetSolution};
use crate::integrate::IntegratorSpec;
use crate::periodic::Coefficients;

/// Spacing of stored phase checkpoints for pointwise evaluation.
pub const DEFAULT_CHECKPOINT_SPACING: f64 = 8.0;

/// Everything needed to rebuild the potential, given the periodic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub a0: f64,
    pub b: f64,
    pub mode: ScheduleMode,
    pub edge_margin: f64,
    pub targets: Vec<f64>,
    pub integrator: IntegratorSpec,
    pub checkpoint_spacing: f64,
    pub breakpoints: Vec<f64>,
    pub probes: Vec<ProbeRecord>,
    pub pieces: Vec<PieceSpec>,
}

/// Piecewise potential: zero on `(-a0, a0)` and between pieces.
#[derive(Debug, Clone)]
pub struct SynthesizedPotential {
    pub manifest: Manifest,
    pub solutions: Vec<Arc<FloquetSolution>>,
    pub pieces: Vec<PotentialPiece>,
    order: Vec<usize>,
}

/// Builds the evaluator for a finished schedule.
pub fn assemble(schedule: &SynthesisSchedule, edge_margin: f64, checkpoint_spacing: f64) -> Result<SynthesizedPotential> {
    let opts = &schedule.options;
    let manifest = Manifest {
        a0: opts.a0,
        b: opts.b,
        mode: opts.mode,
        edge_margin,
        targets: schedule.targets.iter().map(|t| t.lambda).collect(),
        integrator: opts.integrator,
        checkpoint_spacing,
        breakpoints: schedule.breakpoints.clone(),
        probes: schedule.probes.clone(),
        pieces: schedule.pieces.clone(),
    };
    let sols = schedule.targets.iter().map(|t| t.floquet.clone()).collect();
    SynthesizedPotential::new(manifest, sols)
}

impl SynthesizedPotential {
    /// Rebuilds the potential from a manifest and the periodic coefficients.
    pub fn from_manifest(manifest: Manifest, coeffs: &Coefficients) -> Result<Self> {
        let sols = manifest
            .targets
            .par_iter()
            .map(|&l| floquet_solution_with_margin(coeffs, l, &manifest.integrator, manifest.edge_margin).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifest, sols)
    }

    fn new(manifest: Manifest, solutions: Vec<Arc<FloquetSolution>>) -> Result<Self> {
        manifest.integrator.validate()?;
        if !(manifest.checkpoint_spacing > 0.0) {
            return Err(invalid("checkpoint_spacing", "must be positive"));
        }
        for p in &manifest.pieces {
            let sol = solutions
                .get(p.target)
                .ok_or_else(|| invalid("piece.target", format!("no target {}", p.target)))?;
            if p.lambda != sol.lambda {
                return Err(invalid("piece.lambda", format!("{} does not match target {}", p.lambda, p.target)));
            }
            if p.a < manifest.a0 {
                return Err(Error::OverlapDetected { x: p.side.sign() * p.a });
            }
        }
        let mut order: Vec<usize> = (0..manifest.pieces.len()).collect();
        order.sort_by(|&i, &j| {
            let (p, q) = (&manifest.pieces[i], &manifest.pieces[j]);
            p.start_x().total_cmp(&q.start_x())
        });
        for side in [Side::Minus, Side::Plus] {
            let mut on_side: Vec<&PieceSpec> = manifest.pieces.iter().filter(|p| p.side == side).collect();
            on_side.sort_by(|p, q| p.a.total_cmp(&q.a));
            for w in on_side.windows(2) {
                if w[1].a < w[0].x_end {
                    return Err(Error::OverlapDetected { x: side.sign() * w[1].a });
                }
            }
        }
        let pieces = manifest
            .pieces
            .par_iter()
            .map(|p| {
                PotentialPiece::build(
                    p.clone(),
                    &solutions[p.target],
                    &manifest.integrator,
                    manifest.checkpoint_spacing,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            manifest,
            solutions,
            pieces,
            order,
        })
    }

    /// Index of the piece whose interval contains `x`.
    pub fn piece_at(&self, x: f64) -> Option<usize> {
        let mut found = None;
        for (i, p) in self.pieces.iter().enumerate() {
            if p.spec.contains(x) {
                if found.is_some() {
                    // Shared endpoints carry V = 0 on both sides.
                    return found;
                }
                found = Some(i);
            }
        }
        found
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        match self.piece_at(x) {
            None => Ok(0.0),
            Some(i) => {
                let p = &self.pieces[i];
                p.value(x, &self.solutions[p.spec.target], &self.manifest.integrator)
            }
        }
    }

    /// `(x, V(x))` for every piece from the far left to the far right. Each piece is
    /// sampled at `max(stride, length / max_per_piece)` including both ends.
    pub fn samples(&self, stride: f64, max_per_piece: usize) -> Result<Vec<(f64, f64)>> {
        if !(stride > 0.0) || max_per_piece == 0 {
            return Err(invalid("stride", "need stride > 0 and max_per_piece > 0"));
        }
        let per: Vec<Vec<(f64, f64)>> = self
            .order
            .par_iter()
            .map(|&i| {
                let p = &self.pieces[i];
                let h = stride.max((p.spec.x_end - p.spec.a) / max_per_piece as f64);
                let mut s = p.samples(&self.solutions[p.spec.target], &self.manifest.integrator, h)?;
                if p.spec.side == Side::Minus {
                    s.reverse();
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(per.into_iter().flatten().collect())
    }

    /// `max |V| |±x - b| / (|omega| C)` over the samples of each piece.
    pub fn envelope_ratio(&self, samples: &[(f64, f64)]) -> f64 {
        let mut worst: f64 = 0.0;
        for &(x, v) in samples {
            if let Some(i) = self.piece_at(x) {
                let p = &self.pieces[i];
                let cap = p.omega.abs() * p.spec.c;
                worst = worst.max(v.abs() * p.spec.outward_distance(x).abs() / cap);
            }
        }
        worst
    }

    pub fn write_manifest<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.manifest)?;
        Ok(())
    }
}

/// Writes `x,V`.
pub fn write_potential_csv<W: Write>(samples: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "x,V")?;
    for (x, v) in samples {
        writeln!(w, "{x},{v}")?;
    }
    Ok(())
}
