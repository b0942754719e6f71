use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::FloquetSolution;
use crate::integrate::{solve, IntegratorSpec, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        })
    }
}

/// Everything needed to rebuild one piece. On the minus side the piece lives on
/// `[-x_end, -a]` and is integrated leftwards from `-a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub side: Side,
    pub target: usize,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub x_end: f64,
    pub xi0: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub taper_width: f64,
    pub active_count: usize,
}

impl PieceSpec {
    pub fn start_x(&self) -> f64 {
        self.side.sign() * self.a
    }

    pub fn end_x(&self) -> f64 {
        self.side.sign() * self.x_end
    }

    /// `x - b` on the plus side, `x + b` on the minus side.
    #[inline]
    pub fn denominator(&self, x: f64) -> f64 {
        x - self.side.sign() * self.b
    }

    /// Distance `±x - b` from the envelope anchor.
    pub fn outward_distance(&self, x: f64) -> f64 {
        self.side.sign() * x - self.b
    }

    #[inline]
    pub fn window(&self, x: f64) -> f64 {
        window(self.side.sign() * x, self.a, self.x_end, self.taper_width)
    }

    pub fn contains(&self, x: f64) -> bool {
        let s = self.side.sign() * x;
        s >= self.a && s <= self.x_end
    }

    pub fn validate(&self, k: f64) -> Result<()> {
        let finite = [self.a, self.b, self.x_end, self.xi0, self.c, self.taper_width]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("piece", "all fields must be finite"));
        }
        if !(self.a > 0.0 && self.b.abs() < self.a) {
            return Err(invalid("piece.a", format!("need a > |b| (a = {}, b = {})", self.a, self.b)));
        }
        if !(self.x_end > self.a) {
            return Err(invalid("piece.x_end", "must exceed a"));
        }
        if !(self.c > 0.0) {
            return Err(invalid("piece.C", "must be positive"));
        }
        if self.taper_width < 0.0 {
            return Err(invalid("piece.taper_width", "must be non-negative"));
        }
        if self.taper_width > 0.25 * (self.x_end - self.a) {
            return Err(Error::PieceTooShort {
                length: self.x_end - self.a,
                taper: self.taper_width,
            });
        }
        let ratio = 2.0 * self.c / (self.a - self.b);
        if ratio > k {
            return Err(Error::EnvelopeTooLarge { ratio, k });
        }
        Ok(())
    }
}

/// `exp(-1/t)`-based smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let f = (-1.0 / t).exp();
        let g = (-1.0 / (1.0 - t)).exp();
        f / (f + g)
    }
}

/// Smooth window equal to 1 on `[a + w, x_end - w]` and 0 outside `(a, x_end)`;
/// the indicator of `[a, x_end]` when `w = 0`.
#[inline]
pub fn window(s: f64, a: f64, x_end: f64, w: f64) -> f64 {
    if w == 0.0 {
        return if s >= a && s <= x_end { 1.0 } else { 0.0 };
    }
    smooth_step((s - a) / w) * smooth_step((x_end - s) / w)
}

/// The right-hand side of the phase equation for one piece and the potential it induces.
#[derive(Debug, Clone, Copy)]
pub struct PieceField<'a> {
    pub spec: &'a PieceSpec,
    pub sol: &'a FloquetSolution,
}

impl<'a> PieceField<'a> {
    pub fn new(spec: &'a PieceSpec, sol: &'a FloquetSolution) -> Self {
        Self { spec, sol }
    }

    /// `w(x) C / (±x - b)` with the sign of the denominator kept.
    #[inline]
    pub fn coupling(&self, x: f64) -> f64 {
        let w = self.spec.window(x);
        if w == 0.0 {
            0.0
        } else {
            w * self.spec.c / self.spec.denominator(x)
        }
    }

    /// `(xi', V, Psi, coupling)` at `(x, xi)`.
    #[inline]
    pub fn eval(&self, x: f64, xi: f64) -> (f64, f64, f64, f64) {
        let (a, psi, arg_f_prime) = self.sol.xi_coefficients(x);
        let kappa = self.coupling(x);
        let (s, c) = xi.sin_cos();
        let dxi = arg_f_prime + 2.0 * kappa * s * (a - psi * c);
        (dxi, -self.sol.omega * kappa * s, psi, kappa)
    }

    #[inline]
    pub fn xi_rhs(&self, x: f64, xi: f64) -> f64 {
        self.eval(x, xi).0
    }

    #[inline]
    pub fn potential(&self, x: f64, xi: f64) -> f64 {
        -self.sol.omega * self.coupling(x) * xi.sin()
    }
}

/// Samples `(x, xi(x))` of a piece's phase.
#[derive(Debug, Clone, PartialEq)]
pub struct XiTrajectory {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Integrates the phase equation over the piece, sampling at `stride` (outward).
pub fn solve_xi(
    piece: &PieceSpec,
    sol: &FloquetSolution,
    spec: &IntegratorSpec,
    stride: f64,
) -> Result<XiTrajectory> {
    piece.validate(sol.k)?;
    if !(stride > 0.0) {
        return Err(invalid("stride", "must be positive"));
    }
    let field = PieceField::new(piece, sol);
    let f = |x: f64, y: &[f64; 1], d: &mut [f64; 1]| d[0] = field.xi_rhs(x, y[0]);
    let mut out = XiTrajectory { x: Vec::new(), xi: Vec::new() };
    solve(&f, piece.start_x(), piece.end_x(), [piece.xi0], spec, Output::Uniform(stride), |x, y| {
        out.x.push(x);
        out.xi.push(y[0]);
    })?;
    Ok(out)
}

/// A piece whose phase is stored at checkpoints so `V(x)` can be evaluated anywhere.
#[derive(Debug, Clone)]
pub struct PotentialPiece {
    pub spec: PieceSpec,
    pub omega: f64,
    pub checkpoint_spacing: f64,
    pub checkpoints: Vec<f64>,
}

impl PotentialPiece {
    pub fn build(spec: PieceSpec, sol: &FloquetSolution, ispec: &IntegratorSpec, spacing: f64) -> Result<Self> {
        let traj = solve_xi(&spec, sol, ispec, spacing)?;
        let n = ((spec.x_end - spec.a) / spacing).floor() as usize + 1;
        let mut checkpoints = traj.xi;
        checkpoints.truncate(n);
        Ok(Self {
            omega: sol.omega,
            spec,
            checkpoint_spacing: spacing,
            checkpoints,
        })
    }

    fn checkpoint_x(&self, i: usize) -> f64 {
        self.spec.start_x() + self.spec.side.sign() * self.checkpoint_spacing * i as f64
    }

    /// `V(x)`; zero outside the piece.
    pub fn value(&self, x: f64, sol: &FloquetSolution, ispec: &IntegratorSpec) -> Result<f64> {
        if !self.spec.contains(x) {
            return Ok(0.0);
        }
        let field = PieceField::new(&self.spec, sol);
        if field.coupling(x) == 0.0 {
            return Ok(0.0);
        }
        let dist = (x - self.spec.start_x()).abs();
        let mut i = ((dist / self.checkpoint_spacing).floor() as usize).min(self.checkpoints.len() - 1);
        while i > 0 && (self.checkpoint_x(i) - self.spec.start_x()).abs() > dist {
            i -= 1;
        }
        let x0 = self.checkpoint_x(i);
        let f = |t: f64, y: &[f64; 1], d: &mut [f64; 1]| d[0] = field.xi_rhs(t, y[0]);
        let (xi, _) = solve(&f, x0, x, [self.checkpoints[i]], ispec, Output::Ends, |_, _| {})?;
        Ok(field.potential(x, xi[0]))
    }

    /// `(x, V(x))` along the piece at spacing `stride`, both ends included.
    pub fn samples(&self, sol: &FloquetSolution, ispec: &IntegratorSpec, stride: f64) -> Result<Vec<(f64, f64)>> {
        let field = PieceField::new(&self.spec, sol);
        let traj = solve_xi(&self.spec, sol, ispec, stride)?;
        Ok(traj
            .x
            .iter()
            .zip(&traj.xi)
            .map(|(&x, &xi)| (x, field.potential(x, xi)))
            .collect())
    }
}

/// Untapered piece sampled along a phase trajectory: `V = -omega C sin(xi) / (±x - b)`.
pub fn piece_potential(piece: &PieceSpec, sol: &FloquetSolution, traj: &XiTrajectory) -> Vec<(f64, f64)> {
    let raw = PieceSpec {
        taper_width: 0.0,
        ..piece.clone()
    };
    let field = PieceField::new(&raw, sol);
    traj.x.iter().zip(&traj.xi).map(|(&x, &xi)| (x, field.potential(x, xi))).collect()
}

/// The same piece with a smooth taper of width `taper_width` at both ends. The
/// taper also multiplies the coupling in the phase equation, so the target
/// solution stays phase-locked to the potential.
pub fn smooth_compact(piece: &PieceSpec, taper_width: f64) -> Result<PieceSpec> {
    if !(taper_width > 0.0) {
        return Err(invalid("taper_width", "must be positive"));
    }
    if taper_width > 0.25 * (piece.x_end - piece.a) {
        return Err(Error::PieceTooShort {
            length: piece.x_end - piece.a,
            taper: taper_width,
        });
    }
    Ok(PieceSpec {
        taper_width,
        ..piece.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::floquet_solution;
    use crate::periodic::Coefficients;

    fn spec(side: Side, c: f64, taper: f64) -> PieceSpec {
        PieceSpec {
            side,
            target: 0,
            lambda: 0.7,
            a: 1000.0,
            b: 0.0,
            x_end: 1400.0,
            xi0: 1.0,
            c,
            taper_width: taper,
            active_count: 1,
        }
    }

    fn free(l: f64) -> FloquetSolution {
        floquet_solution(&Coefficients::free(), l, &IntegratorSpec::default()).unwrap()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(window(5.0, 0.0, 10.0, 1.0), 1.0);
        assert_eq!(window(0.0, 0.0, 10.0, 1.0), 0.0);
        assert_eq!(window(10.0, 0.0, 10.0, 1.0), 0.0);
        assert_eq!(window(11.0, 0.0, 10.0, 0.0), 0.0);
    }

    #[test]
    fn zero_coupling_is_linear_phase() {
        let sol = free(0.7);
        let mut s = spec(Side::Plus, 1e-300, 0.0);
        s.c = 1e-300;
        let traj = solve_xi(&s, &sol, &IntegratorSpec::default(), 10.0).unwrap();
        for (&x, &xi) in traj.x.iter().zip(&traj.xi) {
            assert!((xi - (1.0 + 1.4 * (x - 1000.0))).abs() < 1e-8 * x);
        }
    }

    #[test]
    fn free_phase_equation_reduces() {
        let sol = free(0.7);
        let s = spec(Side::Plus, 210.0, 0.0);
        let field = PieceField::new(&s, &sol);
        let (x, xi) = (1234.5f64, 0.3f64);
        let expect = 1.4 - 210.0 / x * (2.0 * xi).sin();
        assert!((field.xi_rhs(x, xi) - expect).abs() < 1e-9);
    }

    #[test]
    fn raw_envelope_and_slope() {
        let sol = free(0.7);
        let s = spec(Side::Plus, 210.0, 0.0);
        let traj = solve_xi(&s, &sol, &IntegratorSpec::default(), 1.0).unwrap();
        let v = piece_potential(&s, &sol, &traj);
        for &(x, vx) in &v {
            assert!(vx.abs() * (x - s.b) <= 210.0 * (1.0 + 1e-12));
        }
        let n = traj.x.len() - 1;
        let slope = (traj.xi[n] - traj.xi[0]) / (traj.x[n] - traj.x[0]);
        assert!((slope - 1.4).abs() < 210.0 / 1000.0);
    }

    #[test]
    fn minus_side_runs_leftwards() {
        let sol = free(0.7);
        let s = spec(Side::Minus, 210.0, 1.0);
        let traj = solve_xi(&s, &sol, &IntegratorSpec::default(), 50.0).unwrap();
        assert_eq!(traj.x[0], -1000.0);
        assert_eq!(*traj.x.last().unwrap(), -1400.0);
        assert!(s.denominator(-1200.0) < 0.0);
    }

    #[test]
    fn envelope_too_large() {
        let sol = free(0.7);
        let mut s = spec(Side::Plus, 210.0, 0.0);
        s.a = 500.0;
        assert!(matches!(
            solve_xi(&s, &sol, &IntegratorSpec::default(), 1.0),
            Err(Error::EnvelopeTooLarge { .. })
        ));
    }

    #[test]
    fn taper_checks() {
        let s = spec(Side::Plus, 210.0, 0.0);
        assert!(matches!(smooth_compact(&s, 200.0), Err(Error::PieceTooShort { .. })));
        let t = smooth_compact(&s, 1.0).unwrap();
        assert_eq!(t.window(1200.0), 1.0);
        assert_eq!(t.window(1000.0), 0.0);
        assert_eq!(t.window(1400.0), 0.0);
    }

    #[test]
    fn checkpoint_evaluation_matches_samples() {
        let sol = free(1.3);
        let s = PieceSpec {
            a: 1e4,
            x_end: 1.1e4,
            ..spec(Side::Minus, 210.0, 1.0)
        };
        let ispec = IntegratorSpec::default();
        let p = PotentialPiece::build(s, &sol, &ispec, 8.0).unwrap();
        let samples = p.samples(&sol, &ispec, 3.0).unwrap();
        for &(x, v) in samples.iter().step_by(7) {
            let w = p.value(x, &sol, &ispec).unwrap();
            assert!((w - v).abs() < 1e-7, "x = {x}: {w} vs {v}");
        }
        assert_eq!(p.value(-9999.0, &sol, &ispec).unwrap(), 0.0);
    }
}
