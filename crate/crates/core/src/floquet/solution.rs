use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fundamental_rhs, quasimomentum, Monodromy, Quasimomentum};
use crate::error::{invalid, Error, Result};
use crate::integrate::{solve, IntegratorSpec, Output};
use crate::periodic::Coefficients;

/// The period grid has `2^GRID_EXPONENT` cells.
pub const GRID_EXPONENT: u32 = 12;
pub const DEFAULT_EDGE_MARGIN: f64 = 0.05;

/// How the monodromy eigenvector was normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `|v| = 1`, first nonzero component real and positive.
    UnitFirstRealPositive,
}

/// Complex Floquet solution `g` with `g(x + 1) = e^{ik} g(x)`, tabulated on one
/// period together with continuous branches of its phases.
#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub lambda: f64,
    pub k: f64,
    pub omega: f64,
    pub normalization: Normalization,
    pub monodromy: Monodromy,
    coeffs: Coefficients,
    step: f64,
    g: Vec<[Complex64; 2]>,
    dg: Vec<[Complex64; 2]>,
    gamma: [Vec<f64>; 2],
    arg_f: Vec<f64>,
    gamma_shift: [f64; 2],
    arg_f_shift: f64,
    psi_mean: f64,
}

/// Everything the Prüfer equations need from the frame at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePoint {
    pub g: [Complex64; 2],
    pub dg: [Complex64; 2],
    /// `|g_1|^2, |g_2|^2`.
    pub abs2: [f64; 2],
    /// Continuous arguments of `g_1, g_2`.
    pub gamma: [f64; 2],
    pub gamma_prime: [f64; 2],
    /// `|g_1^2 - g_2^2|`.
    pub psi: f64,
    /// Continuous argument of `g_1^2 - g_2^2`; equals `2 gamma_1 + Gamma_2 = 2kx + delta`.
    pub arg_f: f64,
    /// `2k + delta'`.
    pub arg_f_prime: f64,
}

impl FramePoint {
    pub fn big_gamma2(&self) -> f64 {
        self.arg_f - 2.0 * self.gamma[0]
    }

    /// `|g_1|^2 - |g_2|^2`.
    pub fn abs2_diff(&self) -> f64 {
        self.abs2[0] - self.abs2[1]
    }
}

pub fn floquet_solution(coeffs: &Coefficients, lambda: f64, spec: &IntegratorSpec) -> Result<FloquetSolution> {
    floquet_solution_with_margin(coeffs, lambda, spec, DEFAULT_EDGE_MARGIN)
}

pub fn floquet_solution_with_margin(
    coeffs: &Coefficients,
    lambda: f64,
    spec: &IntegratorSpec,
    edge_margin: f64,
) -> Result<FloquetSolution> {
    spec.validate()?;
    coeffs.validate()?;
    if !lambda.is_finite() {
        return Err(invalid("lambda", "must be finite"));
    }
    if !(0.0..PI / 2.0).contains(&edge_margin) {
        return Err(invalid("edge_margin", "must lie in [0, pi/2)"));
    }
    let n = 1usize << GRID_EXPONENT;
    let step = 1.0 / n as f64;
    let f = fundamental_rhs(coeffs, lambda);
    let mut phi: Vec<[f64; 4]> = Vec::with_capacity(n + 1);
    solve(&f, 0.0, 1.0, [1.0, 0.0, 0.0, 1.0], spec, Output::Uniform(step), |_, y| phi.push(*y))?;
    debug_assert_eq!(phi.len(), n + 1);
    let last = phi[n];
    let mono = Monodromy {
        m: [[last[0], last[2]], [last[1], last[3]]],
        lambda,
    };
    let k = match quasimomentum(&mono) {
        Quasimomentum::Band(k) => k,
        Quasimomentum::Gap(excess) => return Err(Error::InGap { lambda, excess }),
    };
    if k <= edge_margin || k >= PI - edge_margin {
        return Err(Error::BandEdge {
            lambda,
            k,
            margin: edge_margin,
        });
    }
    let v = eigenvector(&mono, k)?;

    let mut g = Vec::with_capacity(n + 1);
    let mut dg = Vec::with_capacity(n + 1);
    for (i, m) in phi.iter().enumerate() {
        let gi = [m[0] * v[0] + m[2] * v[1], m[1] * v[0] + m[3] * v[1]];
        dg.push(rhs_c(coeffs, lambda, i as f64 * step, gi));
        g.push(gi);
    }
    let omega = 2.0 * (g[0][0].conj() * g[0][1]).im;
    if omega.abs() < 1e-12 {
        return Err(Error::DegenerateEigenvector { lambda });
    }

    let gamma = [
        unwrap_phases(g.iter().map(|z| z[0].arg()), step)?,
        unwrap_phases(g.iter().map(|z| z[1].arg()), step)?,
    ];
    let arg_f = unwrap_phases(g.iter().map(|z| (z[0] * z[0] - z[1] * z[1]).arg()), step)?;
    let psi_mean = g[..n].iter().map(|z| (z[0] * z[0] - z[1] * z[1]).norm()).sum::<f64>() / n as f64;

    Ok(FloquetSolution {
        lambda,
        k,
        omega,
        normalization: Normalization::UnitFirstRealPositive,
        monodromy: mono,
        coeffs: coeffs.clone(),
        step,
        gamma_shift: [gamma[0][n] - gamma[0][0], gamma[1][n] - gamma[1][0]],
        arg_f_shift: arg_f[n] - arg_f[0],
        g,
        dg,
        gamma,
        arg_f,
        psi_mean,
    })
}

fn eigenvector(mono: &Monodromy, k: f64) -> Result<[Complex64; 2]> {
    let mu = Complex64::from_polar(1.0, k);
    let m = mono.m;
    let va = [Complex64::new(m[0][1], 0.0), mu - m[0][0]];
    let vb = [mu - m[1][1], Complex64::new(m[1][0], 0.0)];
    let na = (va[0].norm_sqr() + va[1].norm_sqr()).sqrt();
    let nb = (vb[0].norm_sqr() + vb[1].norm_sqr()).sqrt();
    let (v, nv) = if na >= nb { (va, na) } else { (vb, nb) };
    let scale = 1.0 + m.iter().flatten().map(|e| e.abs()).fold(0.0, f64::max);
    if nv < 1e-10 * scale {
        return Err(Error::DegenerateEigenvector { lambda: mono.lambda });
    }
    let lead = if v[0].norm() > 1e-14 * nv { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    Ok([v[0] * phase / nv, v[1] * phase / nv])
}

fn rhs_c(coeffs: &Coefficients, lambda: f64, x: f64, g: [Complex64; 2]) -> [Complex64; 2] {
    let (p, q) = coeffs.eval(x);
    [g[1] * (lambda + p) - g[0] * q, -g[0] * (lambda - p) + g[1] * q]
}

fn wrap(a: f64) -> f64 {
    a - TAU * (a / TAU).round()
}

fn unwrap_phases(args: impl Iterator<Item = f64>, step: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for (i, a) in args.enumerate() {
        match out.last() {
            None => out.push(a),
            Some(&prev) => {
                let d = wrap(a - prev);
                if d.abs() >= PI / 2.0 {
                    return Err(Error::UnwrapJump { x: i as f64 * step, jump: d });
                }
                out.push(prev + d);
            }
        }
    }
    Ok(out)
}

impl FloquetSolution {
    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    /// Number of grid cells on `[0, 1]`.
    pub fn cells(&self) -> usize {
        self.g.len() - 1
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    /// `(x, g(x))` on the period grid.
    pub fn grid(&self) -> impl Iterator<Item = (f64, [Complex64; 2])> + '_ {
        self.g.iter().enumerate().map(move |(i, z)| (i as f64 * self.step, *z))
    }

    pub(crate) fn grid_gamma(&self) -> &[Vec<f64>; 2] {
        &self.gamma
    }

    pub(crate) fn grid_arg_f(&self) -> &[f64] {
        &self.arg_f
    }

    /// Period mean of `Psi`.
    /// Mean slope of `arg F`, i.e. its increase over one period.
    pub fn arg_f_drift(&self) -> f64 {
        self.arg_f_shift
    }

    pub fn psi_mean(&self) -> f64 {
        self.psi_mean
    }

    /// Floquet multiplier `e^{ik}`.
    pub fn multiplier(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.k)
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.cells();
        let u = t / self.step;
        let i = (u.floor() as usize).min(n - 1);
        (i, u - i as f64)
    }

    /// Cubic Hermite interpolation of `g` on `[0, 1]` using the exact derivatives.
    #[inline]
    fn g_period(&self, i: usize, s: f64) -> [Complex64; 2] {
        let h = self.step;
        let s2 = s * s;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s) * h;
        let h01 = s2 * (3.0 - 2.0 * s);
        let h11 = s2 * (s - 1.0) * h;
        let (g0, g1, d0, d1) = (self.g[i], self.g[i + 1], self.dg[i], self.dg[i + 1]);
        [
            g0[0] * h00 + d0[0] * h10 + g1[0] * h01 + d1[0] * h11,
            g0[1] * h00 + d0[1] * h10 + g1[1] * h01 + d1[1] * h11,
        ]
    }

    /// `g(x)` for any real `x`.
    pub fn g_at(&self, x: f64) -> [Complex64; 2] {
        let n = x.floor();
        let (i, s) = self.locate(x - n);
        let z = self.g_period(i, s);
        let mu = Complex64::from_polar(1.0, self.k * n);
        [z[0] * mu, z[1] * mu]
    }

    /// Frame data at `x`; periodic quantities are taken at `x mod 1`.
    pub fn frame(&self, x: f64) -> FramePoint {
        let n = x.floor();
        let t = x - n;
        let (i, s) = self.locate(t);
        let gp = self.g_period(i, s);
        let dgp = rhs_c(&self.coeffs, self.lambda, t, gp);
        let mu = Complex64::from_polar(1.0, self.k * n);
        let abs2 = [gp[0].norm_sqr(), gp[1].norm_sqr()];
        let branch = |table: &[f64], raw: f64| {
            let base = table[i] + s * (table[i + 1] - table[i]);
            base + wrap(raw - base)
        };
        let gamma = [
            branch(&self.gamma[0], gp[0].arg()) + n * self.gamma_shift[0],
            branch(&self.gamma[1], gp[1].arg()) + n * self.gamma_shift[1],
        ];
        let gamma_prime = [
            (gp[0].conj() * dgp[0]).im / abs2[0],
            (gp[1].conj() * dgp[1]).im / abs2[1],
        ];
        let f = gp[0] * gp[0] - gp[1] * gp[1];
        let df = (gp[0] * dgp[0] - gp[1] * dgp[1]) * 2.0;
        let psi2 = f.norm_sqr();
        let psi = psi2.sqrt();
        FramePoint {
            g: [gp[0] * mu, gp[1] * mu],
            dg: [dgp[0] * mu, dgp[1] * mu],
            abs2,
            gamma,
            gamma_prime,
            psi,
            arg_f: branch(&self.arg_f, f.arg()) + n * self.arg_f_shift,
            arg_f_prime: (f.conj() * df).im / psi2,
        }
    }

    /// The subset of [`frame`](Self::frame) used by the `(R, xi)` equations:
    /// `(|g_1|^2 - |g_2|^2, Psi, 2k + delta')`.
    #[inline]
    pub fn xi_coefficients(&self, x: f64) -> (f64, f64, f64) {
        let t = x - x.floor();
        let (i, s) = self.locate(t);
        let gp = self.g_period(i, s);
        let dgp = rhs_c(&self.coeffs, self.lambda, t, gp);
        let f = gp[0] * gp[0] - gp[1] * gp[1];
        let df = (gp[0] * dgp[0] - gp[1] * dgp[1]) * 2.0;
        let psi2 = f.norm_sqr();
        (gp[0].norm_sqr() - gp[1].norm_sqr(), psi2.sqrt(), (f.conj() * df).im / psi2)
    }

    /// `max (|g_1|^2 + |g_2|^2)` over the grid.
    pub fn max_abs2_sum(&self) -> f64 {
        self.g.iter().map(|z| z[0].norm_sqr() + z[1].norm_sqr()).fold(0.0, f64::max)
    }

    pub fn min_abs2_sum(&self) -> f64 {
        self.g.iter().map(|z| z[0].norm_sqr() + z[1].norm_sqr()).fold(f64::INFINITY, f64::min)
    }
}

/// `(gamma_1', gamma_2') = (omega (lambda + p) / (2|g_1|^2), omega (lambda - p) / (2|g_2|^2))`.
pub fn gamma_derivative(sol: &FloquetSolution, x: f64) -> (f64, f64) {
    let fp = sol.frame(x);
    let p = sol.coeffs.p.eval(x);
    (
        sol.omega * (sol.lambda + p) / (2.0 * fp.abs2[0]),
        sol.omega * (sol.lambda - p) / (2.0 * fp.abs2[1]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::PeriodicCoefficient;

    fn sample_coeffs() -> Coefficients {
        Coefficients::new(
            PeriodicCoefficient::new(0.4, vec![0.3, -0.1], vec![0.2]),
            PeriodicCoefficient::new(0.0, vec![0.15], vec![-0.25, 0.05]),
        )
    }

    #[test]
    fn free_case_closed_form() {
        let l = PI / 3.0;
        let sol = floquet_solution(&Coefficients::free(), l, &IntegratorSpec::default()).unwrap();
        assert!((sol.k - l).abs() < 1e-10);
        assert!((sol.omega - 1.0).abs() < 1e-10);
        for (x, z) in sol.grid().step_by(97) {
            assert!((z[0].norm() - 0.5f64.sqrt()).abs() < 1e-10);
            assert!((z[1].norm() - 0.5f64.sqrt()).abs() < 1e-10);
            let e = Complex64::from_polar(0.5f64.sqrt(), l * x);
            assert!((z[0] - e).norm() < 1e-10);
            assert!((z[1] - e * Complex64::i()).norm() < 1e-10);
        }
        let g1 = sol.g_at(1.0);
        let g0 = sol.g_at(0.0);
        let mu = sol.multiplier();
        assert!((g1[0] - mu * g0[0]).norm() < 1e-10 && (g1[1] - mu * g0[1]).norm() < 1e-10);
    }

    #[test]
    fn negative_lambda_gives_negative_omega() {
        let sol = floquet_solution(&Coefficients::free(), -1.0, &IntegratorSpec::default()).unwrap();
        assert!((sol.k - 1.0).abs() < 1e-10);
        assert!((sol.omega + 1.0).abs() < 1e-10);
    }

    #[test]
    fn wronskian_and_floquet_condition() {
        let sol = floquet_solution(&sample_coeffs(), 2.0, &IntegratorSpec::default()).unwrap();
        let n = sol.cells();
        for (_, z) in sol.grid() {
            let w = 2.0 * (z[0].conj() * z[1]).im;
            assert!((w - sol.omega).abs() <= 1e-8 * sol.omega.abs());
        }
        let mu = sol.multiplier();
        assert!((sol.g[n][0] - mu * sol.g[0][0]).norm() < 1e-8);
        assert!((sol.g[n][1] - mu * sol.g[0][1]).norm() < 1e-8);
    }

    #[test]
    fn frame_is_continuous_across_periods() {
        let sol = floquet_solution(&sample_coeffs(), 2.0, &IntegratorSpec::default()).unwrap();
        for &x in &[1.0, 2.0, 7.0, -3.0] {
            let a = sol.frame(x - 1e-9);
            let b = sol.frame(x);
            assert!((a.gamma[0] - b.gamma[0]).abs() < 1e-7);
            assert!((a.gamma[1] - b.gamma[1]).abs() < 1e-7);
            assert!((a.arg_f - b.arg_f).abs() < 1e-7);
        }
    }

    #[test]
    fn frame_matches_interpolated_g() {
        let sol = floquet_solution(&sample_coeffs(), 2.3, &IntegratorSpec::default()).unwrap();
        let fp = sol.frame(5.37);
        let g = sol.g_at(5.37);
        assert!((fp.g[0] - g[0]).norm() < 1e-12);
        assert!((fp.gamma[0].sin() * g[0].norm() - g[0].im).abs() < 1e-10);
        let w = 2.0 * fp.abs2[0].sqrt() * fp.abs2[1].sqrt() * (fp.gamma[1] - fp.gamma[0]).sin();
        assert!((w - sol.omega).abs() < 1e-8);
        let (a, psi, afp) = sol.xi_coefficients(5.37);
        assert_eq!((a, psi, afp), (fp.abs2_diff(), fp.psi, fp.arg_f_prime));
    }

    #[test]
    fn gamma_derivative_matches_finite_difference() {
        let sol = floquet_solution(&sample_coeffs(), 1.7, &IntegratorSpec::default()).unwrap();
        let h = 1e-5;
        for i in 0..20 {
            let x = 0.05 * i as f64 + 0.013;
            let (d1, d2) = gamma_derivative(&sol, x);
            let fd1 = (sol.frame(x + h).gamma[0] - sol.frame(x - h).gamma[0]) / (2.0 * h);
            let fd2 = (sol.frame(x + h).gamma[1] - sol.frame(x - h).gamma[1]) / (2.0 * h);
            assert!((fd1 - d1).abs() <= 1e-6 * (1.0 + d1.abs()));
            assert!((fd2 - d2).abs() <= 1e-6 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn free_gamma_derivative_is_k() {
        let sol = floquet_solution(&Coefficients::free(), PI / 3.0, &IntegratorSpec::default()).unwrap();
        let (a, b) = gamma_derivative(&sol, 0.4);
        assert!((a - PI / 3.0).abs() < 1e-10 && (b - PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let spec = IntegratorSpec::default();
        assert!(matches!(
            floquet_solution(&Coefficients::constant_mass(1.0), 0.5, &spec),
            Err(Error::InGap { .. })
        ));
        assert!(matches!(
            floquet_solution(&Coefficients::free(), 0.01, &spec),
            Err(Error::BandEdge { .. })
        ));
    }
}
