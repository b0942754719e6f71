//! Modified Prüfer coordinates relative to the Floquet frame.
//!
//! A real solution is written as `y_j = Im(rho g_j)` with `rho = R e^{i eta}`;
//! `theta_j = eta + gamma_j` and `xi = 2 theta_1 + Gamma_2`.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::FloquetSolution;
use crate::periodic::RealState2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrueferState {
    pub r: f64,
    pub eta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub xi: f64,
}

impl PrueferState {
    /// Builds the state at `x` from amplitude and `eta`.
    pub fn from_r_eta(r: f64, eta: f64, sol: &FloquetSolution, x: f64) -> Self {
        let fp = sol.frame(x);
        Self {
            r,
            eta,
            theta1: eta + fp.gamma[0],
            theta2: eta + fp.gamma[1],
            xi: 2.0 * eta + fp.arg_f,
        }
    }

    /// Builds the state at `x` from amplitude and `xi`.
    pub fn from_r_xi(r: f64, xi: f64, sol: &FloquetSolution, x: f64) -> Self {
        let fp = sol.frame(x);
        let eta = 0.5 * (xi - fp.arg_f);
        Self {
            r,
            eta,
            theta1: eta + fp.gamma[0],
            theta2: eta + fp.gamma[1],
            xi,
        }
    }
}

/// `rho = (2/omega)(conj(g_1) y_2 - conj(g_2) y_1)`.
pub fn rho(y: RealState2, g: [Complex64; 2], omega: f64) -> Complex64 {
    (g[0].conj() * y.y2 - g[1].conj() * y.y1) * (2.0 / omega)
}

/// Polar data of `y` at `x`. `eta` is placed on the branch nearest `eta_prev`
/// when given, else in `(0, 2 pi]`.
pub fn to_prufer(y: RealState2, sol: &FloquetSolution, x: f64, eta_prev: Option<f64>) -> Result<PrueferState> {
    if y.y1 == 0.0 && y.y2 == 0.0 {
        return Err(Error::ZeroSolution { x });
    }
    let fp = sol.frame(x);
    let rh = rho(y, fp.g, sol.omega);
    let raw = rh.arg();
    let eta = match eta_prev {
        Some(prev) => prev + wrap(raw - prev),
        None => {
            if raw <= 0.0 {
                raw + TAU
            } else {
                raw
            }
        }
    };
    Ok(PrueferState {
        r: rh.norm(),
        eta,
        theta1: eta + fp.gamma[0],
        theta2: eta + fp.gamma[1],
        xi: 2.0 * eta + fp.arg_f,
    })
}

/// `y_j = R |g_j| sin(theta_j)`.
pub fn from_prufer(state: &PrueferState, sol: &FloquetSolution, x: f64) -> RealState2 {
    let fp = sol.frame(x);
    RealState2::new(
        state.r * fp.abs2[0].sqrt() * state.theta1.sin(),
        state.r * fp.abs2[1].sqrt() * state.theta2.sin(),
    )
}

/// `(R'/R, theta_1', theta_2')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrueferDerivatives {
    pub log_r: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Amplitude-phase equations in the two angles.
pub fn prufer_rhs(state: &PrueferState, v: f64, sol: &FloquetSolution, x: f64) -> PrueferDerivatives {
    let fp = sol.frame(x);
    let (s1, c1) = state.theta1.sin_cos();
    let (s2, c2) = state.theta2.sin_cos();
    let vo = v / sol.omega;
    let turn = 2.0 * vo * (fp.abs2[0] * s1 * s1 - fp.abs2[1] * s2 * s2);
    PrueferDerivatives {
        log_r: vo * (fp.abs2[0] * 2.0 * s1 * c1 - fp.abs2[1] * 2.0 * s2 * c2),
        theta1: fp.gamma_prime[0] - turn,
        theta2: fp.gamma_prime[1] - turn,
    }
}

/// `(R'/R, xi')` for the combined angle.
#[inline]
pub fn r_xi_rhs(xi: f64, v: f64, sol: &FloquetSolution, x: f64) -> (f64, f64) {
    let (a, psi, arg_f_prime) = sol.xi_coefficients(x);
    let vo = v / sol.omega;
    let (s, c) = xi.sin_cos();
    (vo * psi * s, arg_f_prime - 2.0 * vo * (a - psi * c))
}

/// Bounds `(lo, hi)` with `lo <= R / |y| <= hi` for every solution.
pub fn comparability_bounds(sol: &FloquetSolution) -> (f64, f64) {
    let max = sol.max_abs2_sum();
    (1.0 / max.sqrt(), 2.0 * max.sqrt() / sol.omega.abs())
}

pub(crate) fn wrap(a: f64) -> f64 {
    a - TAU * (a / TAU).round()
}

/// One row of a Prüfer trajectory export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrueferSample {
    pub x: f64,
    pub ln_r: f64,
    pub state: PrueferState,
}

/// Writes `x,R,ln_R,eta,theta1,theta2,xi`.
pub fn write_prufer_csv<W: Write>(samples: &[PrueferSample], mut w: W) -> Result<()> {
    writeln!(w, "x,R,ln_R,eta,theta1,theta2,xi")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.x, s.state.r, s.ln_r, s.state.eta, s.state.theta1, s.state.theta2, s.state.xi
        )?;
    }
    Ok(())
}
