use serde::{Deserialize, Serialize};

use super::track::PieceTrack;
use crate::error::{Error, Result};
use crate::synth::Side;

pub const MIN_CYCLES: usize = 3;
pub const TAIL_RATIO_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSum {
    pub start: f64,
    pub end: f64,
    /// `ln ∫ R^2` over the cycle.
    pub ln_int_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub target: usize,
    pub side: Side,
    pub cycles: Vec<CycleSum>,
    /// Ratio of each cycle sum to the previous one.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub limit: f64,
}

impl TailReport {
    /// Embedded-eigenvalue candidate: every ratio at most the limit.
    pub fn positive(&self) -> bool {
        self.max_ratio <= self.limit
    }
}

/// `ln(sum exp(l_i))`.
pub fn log_sum_exp(ls: &[f64]) -> f64 {
    let m = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Ratios of consecutive sums given their logarithms.
pub fn cycle_ratios(ln_sums: &[f64]) -> Vec<f64> {
    ln_sums.windows(2).map(|w| (w[1] - w[0]).exp()).collect()
}

/// Per-cycle `∫ R^2` for one target on one side. `tracks` are that target's
/// tracks in outward order; a cycle runs from the start of one of its own
/// pieces to the start of the next.
pub fn l2_tail_estimate(target: usize, side: Side, tracks: &[PieceTrack]) -> Result<TailReport> {
    let starts: Vec<usize> = tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.owner == target)
        .map(|(i, _)| i)
        .collect();
    let complete = starts.len().saturating_sub(1);
    if complete < MIN_CYCLES {
        return Err(Error::InconclusiveTail { cycles: complete });
    }
    let cycles: Vec<CycleSum> = starts
        .windows(2)
        .map(|w| {
            let part = &tracks[w[0]..w[1]];
            let ls: Vec<f64> = part.iter().map(|t| t.ln_int_r2).collect();
            CycleSum {
                start: part[0].start,
                end: part[part.len() - 1].end,
                ln_int_r2: log_sum_exp(&ls),
            }
        })
        .collect();
    let ratios = cycle_ratios(&cycles.iter().map(|c| c.ln_int_r2).collect::<Vec<_>>());
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TailReport {
        target,
        side,
        cycles,
        ratios,
        max_ratio,
        limit: TAIL_RATIO_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(owner: usize, start: f64, end: f64, ln_int: f64) -> PieceTrack {
        PieceTrack {
            piece: 0,
            owner,
            target: 0,
            start,
            end,
            xi_start: 0.0,
            xi_end: 0.0,
            ln_r_start: 0.0,
            ln_r_end: 0.0,
            ln_r_max: 0.0,
            ln_int_r2: ln_int,
            locked: owner == 0,
            phase_mismatch: 0.0,
            envelope_max: 0.0,
            h_ratio_max: 0.0,
        }
    }

    #[test]
    fn power_law_cycles() {
        // R = (x/a)^{-100} on consecutive intervals [a rho^n, a rho^{n+1}]:
        // each integral is the previous one times rho^{-199}.
        let (a, rho) = (1e4f64, 1.05f64);
        let int = |x0: f64, x1: f64| {
            let e = -200.0;
            ((x1 / a).powf(e + 1.0) - (x0 / a).powf(e + 1.0)) * a / (e + 1.0)
        };
        let tracks: Vec<PieceTrack> = (0..5)
            .map(|n| {
                let (x0, x1) = (a * rho.powi(n), a * rho.powi(n + 1));
                track(0, x0, x1, int(x0, x1).ln())
            })
            .collect();
        let r = l2_tail_estimate(0, Side::Plus, &tracks).unwrap();
        for q in &r.ratios {
            assert!((q / rho.powf(-199.0) - 1.0).abs() < 1e-9);
        }
        assert!(r.positive());
    }

    #[test]
    fn constant_r_is_negative() {
        let tracks: Vec<PieceTrack> = (0..8)
            .map(|n| {
                let x0 = 100.0 * 1.1f64.powi(n);
                track((n % 2) as usize, x0, x0 * 1.1, (0.1 * x0).ln())
            })
            .collect();
        let r = l2_tail_estimate(0, Side::Plus, &tracks).unwrap();
        assert!(r.max_ratio >= 1.0 && !r.positive());
        assert_eq!(r.cycles.len(), 3);
    }

    #[test]
    fn too_few_cycles() {
        let tracks: Vec<PieceTrack> = (0..3).map(|n| track(0, n as f64, n as f64 + 1.0, 0.0)).collect();
        assert!(matches!(
            l2_tail_estimate(0, Side::Plus, &tracks),
            Err(Error::InconclusiveTail { cycles: 2 })
        ));
        assert_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
    }
}
