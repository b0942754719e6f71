//! Periodic coefficients and the Dirac systems built on them.
//!
//! The operator
//!
//! ```text
//!   [0 -1; 1 0] y' + [p q; q -p] y + diag(V, -V) y = lambda y
//! ```
//!
//! is rewritten as the first-order system
//!
//! ```text
//!   y1' =  (lambda + p + V) y2 - q y1
//!   y2' = -(lambda - p - V) y1 + q y2
//! ```
//!
//! whose matrix is trace-free, so the flow preserves the Wronskian.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{invalid, Result};

/// A 1-periodic real function stored as a truncated Fourier series
/// `a0/2 + sum_n cos_coeffs[n-1] cos(2 pi n x) + sin_coeffs[n-1] sin(2 pi n x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicCoefficient {
    #[serde(default)]
    pub a0: f64,
    #[serde(default, rename = "cos")]
    pub cos_coeffs: Vec<f64>,
    #[serde(default, rename = "sin")]
    pub sin_coeffs: Vec<f64>,
}

impl PeriodicCoefficient {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The constant function `m` (stored as `a0 = 2m`).
    pub fn constant(m: f64) -> Self {
        Self {
            a0: 2.0 * m,
            ..Self::default()
        }
    }

    pub fn new(a0: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Self {
        Self {
            a0,
            cos_coeffs,
            sin_coeffs,
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let finite = self.a0.is_finite()
            && self.cos_coeffs.iter().all(|c| c.is_finite())
            && self.sin_coeffs.iter().all(|c| c.is_finite());
        if finite {
            Ok(())
        } else {
            Err(invalid(name, "Fourier coefficients must be finite"))
        }
    }

    pub fn is_constant(&self) -> bool {
        self.cos_coeffs.iter().all(|&c| c == 0.0) && self.sin_coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn harmonics(&self) -> usize {
        self.cos_coeffs.len().max(self.sin_coeffs.len())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut value = 0.5 * self.a0;
        let n = self.harmonics();
        if n == 0 {
            return value;
        }
        let t = x - x.floor();
        let (s1, c1) = (TAU * t).sin_cos();
        let (mut sn, mut cn) = (s1, c1);
        for i in 0..n {
            if let Some(a) = self.cos_coeffs.get(i) {
                value += a * cn;
            }
            if let Some(b) = self.sin_coeffs.get(i) {
                value += b * sn;
            }
            let next_c = cn * c1 - sn * s1;
            sn = sn * c1 + cn * s1;
            cn = next_c;
        }
        value
    }
}

/// The pair `(p, q)` of periodic coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default)]
    pub p: PeriodicCoefficient,
    #[serde(default)]
    pub q: PeriodicCoefficient,
}

impl Coefficients {
    pub fn new(p: PeriodicCoefficient, q: PeriodicCoefficient) -> Self {
        Self { p, q }
    }

    /// `p = q = 0`.
    pub fn free() -> Self {
        Self::default()
    }

    /// Constant mass `p = m`, `q = 0`.
    pub fn constant_mass(m: f64) -> Self {
        Self {
            p: PeriodicCoefficient::constant(m),
            q: PeriodicCoefficient::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.p.validate("p")?;
        self.q.validate("q")
    }

    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.p.eval(x), self.q.eval(x))
    }
}

/// A real solution vector `(y1, y2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RealState2 {
    pub y1: f64,
    pub y2: f64,
}

impl RealState2 {
    pub const fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }

    pub fn norm(&self) -> f64 {
        self.y1.hypot(self.y2)
    }

    pub fn is_finite(&self) -> bool {
        self.y1.is_finite() && self.y2.is_finite()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.y1, self.y2]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { y1: a[0], y2: a[1] }
    }
}

impl std::ops::Add for RealState2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.y1 + o.y1, self.y2 + o.y2)
    }
}

impl std::ops::Mul<RealState2> for f64 {
    type Output = RealState2;
    fn mul(self, o: RealState2) -> RealState2 {
        RealState2::new(self * o.y1, self * o.y2)
    }
}

/// A scalar perturbation `V(x)`, entering the system as `diag(V, -V)`.
pub trait Potential: Sync {
    fn value(&self, x: f64) -> f64;
}

impl<F> Potential for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `V = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _x: f64) -> f64 {
        0.0
    }
}

/// Right-hand side of the system with effective mass `p_eff = p + V`.
#[inline]
pub(crate) fn dirac_rhs(lambda: f64, p_eff: f64, q: f64, y: [f64; 2]) -> [f64; 2] {
    [
        (lambda + p_eff) * y[1] - q * y[0],
        -(lambda - p_eff) * y[0] + q * y[1],
    ]
}

/// `y' = A(x, lambda) y` for the unperturbed periodic operator.
pub fn unperturbed_rhs(coeffs: &Coefficients, lambda: f64, x: f64, y: RealState2) -> RealState2 {
    let (p, q) = coeffs.eval(x);
    RealState2::from_array(dirac_rhs(lambda, p, q, y.to_array()))
}

/// Same as [`unperturbed_rhs`] with the potential matrix `(p+V, q; q, -p-V)`.
pub fn perturbed_rhs(
    coeffs: &Coefficients,
    v: &dyn Potential,
    lambda: f64,
    x: f64,
    y: RealState2,
) -> RealState2 {
    let (p, q) = coeffs.eval(x);
    RealState2::from_array(dirac_rhs(lambda, p + v.value(x), q, y.to_array()))
}
