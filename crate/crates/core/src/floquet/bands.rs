use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::monodromy;
use crate::error::{invalid, Error, Result};
use crate::integrate::IntegratorSpec;
use crate::periodic::Coefficients;

pub const DEFAULT_SCAN_STEP: f64 = 1e-2;

// Samples with |trace/2| - 1 below this count as in-band; absorbs integration noise
// where bands touch.
const TOUCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub a: f64,
    pub b: f64,
    /// +1 if `k` increases across the band, -1 if it decreases.
    pub k_direction: i8,
    /// Whether each end is a refined edge or just the end of the scan range.
    pub a_is_edge: bool,
    pub b_is_edge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub bands: Vec<Band>,
    pub scan_range: (f64, f64),
    pub resolution: f64,
    /// `(lambda, trace)` on the scan grid.
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

impl BandStructure {
    /// Refined band edges strictly inside the scan range.
    pub fn edges(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for band in &self.bands {
            if band.a_is_edge {
                out.push(band.a);
            }
            if band.b_is_edge {
                out.push(band.b);
            }
        }
        out
    }
}

pub fn band_scan(
    coeffs: &Coefficients,
    range: (f64, f64),
    resolution: f64,
    spec: &IntegratorSpec,
) -> Result<BandStructure> {
    band_scan_with_step(coeffs, range, DEFAULT_SCAN_STEP, resolution, spec)
}

/// Scans `trace(lambda)` on a grid of spacing at most `step` and bisects every
/// in/out transition down to `resolution`.
pub fn band_scan_with_step(
    coeffs: &Coefficients,
    range: (f64, f64),
    step: f64,
    resolution: f64,
    spec: &IntegratorSpec,
) -> Result<BandStructure> {
    if !(resolution > 0.0) {
        return Err(invalid("resolution", "must be positive"));
    }
    if !(step > 0.0) {
        return Err(invalid("scan_step", "must be positive"));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(invalid("lambda_range", "must be finite"));
    }
    coeffs.validate()?;
    let mut out = BandStructure {
        bands: Vec::new(),
        scan_range: range,
        resolution,
        samples: Vec::new(),
    };
    if hi <= lo {
        return Ok(out);
    }
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let traces = grid
        .par_iter()
        .map(|&l| monodromy(coeffs, l, spec).map(|m| m.trace()))
        .collect::<Result<Vec<f64>>>()?;
    let inside: Vec<bool> = traces.iter().map(|t| 0.5 * t.abs() - 1.0 <= TOUCH_TOL).collect();

    for i in 1..n {
        if inside[i] != inside[i - 1] && inside[i] != inside[i + 1] {
            return Err(Error::ScanTooCoarse { lambda: grid[i] });
        }
    }

    let excess = |l: f64| -> Result<f64> { Ok(0.5 * monodromy(coeffs, l, spec)?.trace().abs() - 1.0) };
    let refine = |l_in: f64, l_out: f64| -> Result<f64> {
        let (mut a, mut b) = (l_in, l_out);
        while (b - a).abs() > resolution {
            let m = 0.5 * (a + b);
            if excess(m)? <= TOUCH_TOL {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    };

    let mut i = 0;
    while i <= n {
        if !inside[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && inside[i + 1] {
            i += 1;
        }
        let end = i;
        let (a, a_is_edge) = if start == 0 {
            (grid[0], false)
        } else {
            (refine(grid[start], grid[start - 1])?, true)
        };
        let (b, b_is_edge) = if end == n {
            (grid[n], false)
        } else {
            (refine(grid[end], grid[end + 1])?, true)
        };
        let k_at = |j: usize| quasimomentum_of_trace(traces[j]);
        let mut dir = 0.0;
        if end > start {
            dir = k_at(end) - k_at(start);
            if dir == 0.0 {
                dir = k_at(start + 1) - k_at(start);
            }
        }
        out.bands.push(Band {
            a,
            b,
            k_direction: if dir < 0.0 { -1 } else { 1 },
            a_is_edge,
            b_is_edge,
        });
        i += 1;
    }
    out.samples = grid.into_iter().zip(traces).collect();
    Ok(out)
}

fn quasimomentum_of_trace(trace: f64) -> f64 {
    (0.5 * trace).clamp(-1.0, 1.0).acos()
}

/// Writes `lambda,trace,k`; `k` is left empty in gaps.
pub fn write_bands_csv<W: Write>(bands: &BandStructure, mut w: W) -> Result<()> {
    writeln!(w, "lambda,trace,k")?;
    for &(l, t) in &bands.samples {
        if 0.5 * t.abs() <= 1.0 {
            writeln!(w, "{l},{t},{}", quasimomentum_of_trace(t))?;
        } else {
            writeln!(w, "{l},{t},")?;
        }
    }
    Ok(())
}
