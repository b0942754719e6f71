use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FloquetSolution;
use crate::error::Result;

/// Amplitudes, phases and the combined quantities `Gamma_1, Psi, Gamma_2, delta`
/// on the period grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedPeriodicData {
    pub x: Vec<f64>,
    pub abs_g1: Vec<f64>,
    pub abs_g2: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    /// `2 gamma_2 - 2 gamma_1`.
    pub big_gamma1: Vec<f64>,
    pub psi: Vec<f64>,
    pub big_gamma2: Vec<f64>,
    pub delta: Vec<f64>,
    pub psi_mean: f64,
}

impl DerivedPeriodicData {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn min_psi(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn derived_data(sol: &FloquetSolution) -> DerivedPeriodicData {
    let gamma = sol.grid_gamma();
    let arg_f = sol.grid_arg_f();
    let mut d = DerivedPeriodicData {
        x: Vec::new(),
        abs_g1: Vec::new(),
        abs_g2: Vec::new(),
        gamma1: gamma[0].clone(),
        gamma2: gamma[1].clone(),
        phi1: Vec::new(),
        phi2: Vec::new(),
        big_gamma1: Vec::new(),
        psi: Vec::new(),
        big_gamma2: Vec::new(),
        delta: Vec::new(),
        psi_mean: sol.psi_mean(),
    };
    for (i, (x, g)) in sol.grid().enumerate() {
        let (a1, a2) = (g[0].norm(), g[1].norm());
        d.x.push(x);
        d.abs_g1.push(a1);
        d.abs_g2.push(a2);
        d.phi1.push(gamma[0][i] - sol.k * x);
        d.phi2.push(gamma[1][i] - sol.k * x);
        d.big_gamma1.push(2.0 * (gamma[1][i] - gamma[0][i]));
        d.psi.push((g[0] * g[0] - g[1] * g[1]).norm());
        d.big_gamma2.push(arg_f[i] - 2.0 * gamma[0][i]);
        d.delta.push(arg_f[i] - 2.0 * sol.k * x);
    }
    d
}

/// Writes the period grid with columns
/// `x,re_g1,im_g1,re_g2,im_g2,abs_g1,abs_g2,gamma1,gamma2,Gamma1,Psi,Gamma2,delta`.
pub fn write_floquet_csv<W: Write>(sol: &FloquetSolution, data: &DerivedPeriodicData, mut w: W) -> Result<()> {
    writeln!(w, "x,re_g1,im_g1,re_g2,im_g2,abs_g1,abs_g2,gamma1,gamma2,Gamma1,Psi,Gamma2,delta")?;
    for (i, (x, g)) in sol.grid().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            x,
            g[0].re,
            g[0].im,
            g[1].re,
            g[1].im,
            data.abs_g1[i],
            data.abs_g2[i],
            data.gamma1[i],
            data.gamma2[i],
            data.big_gamma1[i],
            data.psi[i],
            data.big_gamma2[i],
            data.delta[i]
        )?;
    }
    Ok(())
}
