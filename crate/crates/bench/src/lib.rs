//! Shared fixtures for the benchmarks.

use floquet_embed::synth::{check_nonresonance, EmbeddingTarget, PieceSpec, Side};
use floquet_embed::{Coefficients, IntegratorSpec, PeriodicCoefficient};

pub fn mixed_coeffs() -> Coefficients {
    Coefficients::new(
        PeriodicCoefficient::new(0.3, vec![0.2, -0.05], vec![0.1]),
        PeriodicCoefficient::new(0.0, vec![0.1], vec![0.15]),
    )
}

pub fn targets(coeffs: &Coefficients, lambdas: &[f64]) -> Vec<EmbeddingTarget> {
    check_nonresonance(lambdas, coeffs, 0.02, 0.05, 5.0, &IntegratorSpec::default()).expect("valid targets")
}

/// A single free-case piece for `lambda = 0.7` on `[a, 2a]`.
pub fn free_piece(a: f64) -> PieceSpec {
    PieceSpec {
        side: Side::Plus,
        target: 0,
        lambda: 0.7,
        a,
        b: 0.0,
        x_end: 2.0 * a,
        xi0: std::f64::consts::FRAC_PI_2,
        c: 210.0,
        taper_width: 1.0,
        active_count: 1,
    }
}
