//! Monodromy, band structure and the Floquet frame of the unperturbed system.

mod bands;
mod derived;
mod solution;

pub use bands::{band_scan, band_scan_with_step, write_bands_csv, Band, BandStructure, DEFAULT_SCAN_STEP};
pub use derived::{derived_data, write_floquet_csv, DerivedPeriodicData};
pub use solution::{
    floquet_solution, floquet_solution_with_margin, gamma_derivative, FloquetSolution, FramePoint,
    DEFAULT_EDGE_MARGIN, GRID_EXPONENT,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrate::{solve, IntegratorSpec, Output};
use crate::periodic::{dirac_rhs, Coefficients};

/// Real fundamental matrix of the unperturbed system over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub m: [[f64; 2]; 2],
    pub lambda: f64,
}

impl Monodromy {
    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

/// Outcome of [`quasimomentum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quasimomentum {
    Band(f64),
    /// `|trace/2| - 1 > 0`.
    Gap(f64),
}

impl Quasimomentum {
    pub fn k(&self) -> Option<f64> {
        match *self {
            Quasimomentum::Band(k) => Some(k),
            Quasimomentum::Gap(_) => None,
        }
    }
}

/// Right-hand side for the fundamental matrix stored column-major as `[u1, u2, v1, v2]`.
pub(crate) fn fundamental_rhs(coeffs: &Coefficients, lambda: f64) -> impl Fn(f64, &[f64; 4], &mut [f64; 4]) + '_ {
    move |x, y, dy| {
        let (p, q) = coeffs.eval(x);
        let a = dirac_rhs(lambda, p, q, [y[0], y[1]]);
        let b = dirac_rhs(lambda, p, q, [y[2], y[3]]);
        *dy = [a[0], a[1], b[0], b[1]];
    }
}

pub fn monodromy(coeffs: &Coefficients, lambda: f64, spec: &IntegratorSpec) -> Result<Monodromy> {
    spec.validate()?;
    let f = fundamental_rhs(coeffs, lambda);
    let (y, _) = solve(&f, 0.0, 1.0, [1.0, 0.0, 0.0, 1.0], spec, Output::Ends, |_, _| {})?;
    Ok(Monodromy {
        m: [[y[0], y[2]], [y[1], y[3]]],
        lambda,
    })
}

pub fn quasimomentum(mono: &Monodromy) -> Quasimomentum {
    let half = 0.5 * mono.trace();
    if half.abs() <= 1.0 {
        Quasimomentum::Band(half.acos())
    } else {
        Quasimomentum::Gap(half.abs() - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_monodromy_is_rotation() {
        let spec = IntegratorSpec::default();
        for &l in &[0.3, 1.0, PI / 3.0, 2.5, -1.2] {
            let m = monodromy(&Coefficients::free(), l, &spec).unwrap();
            assert!((m.m[0][0] - l.cos()).abs() < 1e-9);
            assert!((m.m[0][1] - l.sin()).abs() < 1e-9);
            assert!((m.m[1][0] + l.sin()).abs() < 1e-9);
            assert!((m.det() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quasimomentum_examples() {
        let spec = IntegratorSpec::default();
        let m = monodromy(&Coefficients::free(), PI / 3.0, &spec).unwrap();
        assert!((quasimomentum(&m).k().unwrap() - PI / 3.0).abs() < 1e-8);
        let m = monodromy(&Coefficients::free(), PI / 2.0, &spec).unwrap();
        assert!((quasimomentum(&m).k().unwrap() - PI / 2.0).abs() < 1e-8);
        let m = monodromy(&Coefficients::constant_mass(1.0), 0.5, &spec).unwrap();
        match quasimomentum(&m) {
            Quasimomentum::Gap(e) => assert!((e - (0.75f64.sqrt().cosh() - 1.0)).abs() < 1e-8),
            other => panic!("expected gap, got {other:?}"),
        }
    }
}
