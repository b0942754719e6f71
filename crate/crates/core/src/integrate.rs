//! Adaptive Dormand–Prince 8(5,3) integration on fixed-size real states.
//!
//! Output points are hit exactly by shortening the step that would cross
//! them, so no interpolation is involved and identical inputs always give
//! bit-identical trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::periodic::{perturbed_rhs, unperturbed_rhs, Coefficients, Potential, RealState2};

/// Tolerances and output spacing for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Output spacing near the origin; grows like `stride * |x|` for `|x| > 1`.
    pub dense_output_stride: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            dense_output_stride: 1e-2,
        }
    }
}

impl IntegratorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(invalid(
                    if name == "rel_tol" { "rel_tol" } else { "abs_tol" },
                    format!("{v} must lie in (0, 1e-4]"),
                ));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(invalid("max_step", "must be positive"));
        }
        if !(self.dense_output_stride > 0.0) {
            return Err(invalid("dense_output_stride", "must be positive"));
        }
        Ok(())
    }

    /// Copy with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Where the observer passed to [`solve`] is invoked (besides both endpoints).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Output {
    /// Only at the endpoints.
    Ends,
    /// After every accepted step.
    EveryStep,
    /// At `x0 + n * h`.
    Uniform(f64),
    /// Spacing `s * max(1, |x|)`.
    Scaled(f64),
}

impl Output {
    fn next_after(&self, x0: f64, x: f64, n: u64, dir: f64) -> Option<f64> {
        match *self {
            Output::Ends | Output::EveryStep => None,
            Output::Uniform(h) => Some(x0 + dir * h * (n + 1) as f64),
            Output::Scaled(s) => Some(x + dir * s * x.abs().max(1.0)),
        }
    }
}

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, x: f64, y: &[f64; N], dy: &mut [f64; N]);
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]),
{
    #[inline]
    fn rhs(&self, x: f64, y: &[f64; N], dy: &mut [f64; N]) {
        self(x, y, dy)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub evaluations: u64,
    pub accepted: u64,
    pub rejected: u64,
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
///
/// `observe` sees `(x0, y0)`, every output point and `(x1, y(x1))`.
pub fn solve<const N: usize, S, F>(
    system: &S,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    spec: &IntegratorSpec,
    output: Output,
    mut observe: F,
) -> Result<([f64; N], Stats)>
where
    S: OdeSystem<N> + ?Sized,
    F: FnMut(f64, &[f64; N]),
{
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState { x: x0 });
    }
    observe(x0, &y0);
    let mut stats = Stats::default();
    if x1 == x0 {
        return Ok((y0, stats));
    }
    let dir = if x1 > x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut y = y0;
    let mut k = [[0.0f64; N]; 12];
    system.rhs(x, &y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = initial_step(system, x, &y, &k[0], x1, spec, &mut stats);
    let mut rejected_last = false;
    let mut n_out = 0u64;
    let mut next_out = output.next_after(x0, x, n_out, dir);
    let mut ynew = [0.0f64; N];

    loop {
        if h.abs() < 1e-14 * x.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { x });
        }
        let mut step = h;
        let mut hits_output = false;
        let mut last = false;
        if (x + 1.01 * step - x1) * dir >= 0.0 {
            step = x1 - x;
            last = true;
        }
        if let Some(xo) = next_out {
            if (xo - x1) * dir < 0.0 && (x + step - xo) * dir >= 0.0 {
                step = xo - x;
                hits_output = true;
                last = false;
            }
        }

        let err = dop853_step(system, x, &y, step, &mut k, &mut ynew, spec);
        stats.evaluations += 11;

        // Step-size controller of DOP853.
        let fac11 = err.powf(0.125);
        let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
        let h_prop = step / fac;
        if err <= 1.0 {
            stats.accepted += 1;
            if !ynew.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { x: x + step });
            }
            x = if last { x1 } else if hits_output { next_out.unwrap() } else { x + step };
            y = ynew;
            system.rhs(x, &y, &mut k[0]);
            stats.evaluations += 1;
            if last {
                observe(x, &y);
                return Ok((y, stats));
            }
            if hits_output {
                observe(x, &y);
                n_out += 1;
                next_out = output.next_after(x0, x, n_out, dir);
            } else if output == Output::EveryStep {
                observe(x, &y);
            }
            let mut h_next = h_prop.abs().min(spec.max_step);
            if rejected_last {
                h_next = h_next.min(step.abs());
            }
            // Shortened steps (output hits) should not shrink the natural step.
            if hits_output && step.abs() < h.abs() {
                h_next = h_next.max(h.abs().min(spec.max_step));
            }
            h = dir * h_next;
            rejected_last = false;
        } else {
            stats.rejected += 1;
            let shrink = (fac11 / 0.9).min(3.0);
            h = step / shrink;
            rejected_last = true;
        }
    }
}

fn initial_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    system: &S,
    x: f64,
    y: &[f64; N],
    f0: &[f64; N],
    x1: f64,
    spec: &IntegratorSpec,
    stats: &mut Stats,
) -> f64 {
    let dir = if x1 > x { 1.0 } else { -1.0 };
    let span = (x1 - x).abs();
    let (mut d0, mut d1) = (0.0, 0.0);
    for i in 0..N {
        let sc = spec.abs_tol + y[i].abs() * spec.rel_tol;
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * (d0 / d1).sqrt()
    };
    h0 = h0.min(spec.max_step).min(span);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y[i] + dir * h0 * f0[i];
    }
    let mut f1 = [0.0; N];
    system.rhs(x + dir * h0, &y1, &mut f1);
    stats.evaluations += 1;
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = spec.abs_tol + y[i].abs() * spec.rel_tol;
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    let d2 = d2.sqrt() / h0;
    let h1 = if d1.sqrt().max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.sqrt().max(d2)).powf(1.0 / 8.0)
    };
    dir * (100.0 * h0).min(h1).min(spec.max_step).min(span)
}

/// One DOP853 step; returns the scaled error norm. `k[0]` must hold `f(x, y)`.
#[inline]
fn dop853_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    system: &S,
    x: f64,
    y: &[f64; N],
    h: f64,
    k: &mut [[f64; N]; 12],
    ynew: &mut [f64; N],
    spec: &IntegratorSpec,
) -> f64 {
    let mut tmp = [0.0f64; N];
    for s in 1..12 {
        let row = A[s - 1];
        for i in 0..N {
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                if *a != 0.0 {
                    acc += a * k[j][i];
                }
            }
            tmp[i] = y[i] + h * acc;
        }
        let (head, tail) = k.split_at_mut(s);
        let _ = head;
        system.rhs(x + C[s] * h, &tmp, &mut tail[0]);
    }
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..N {
        let mut sum = 0.0;
        for (j, b) in B.iter().enumerate() {
            sum += b * k[j][i];
        }
        ynew[i] = y[i] + h * sum;
        let sc = spec.abs_tol + y[i].abs().max(ynew[i].abs()) * spec.rel_tol;
        let e5: f64 = E5.iter().enumerate().map(|(j, e)| e * k[j][i]).sum();
        let e3 = sum - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
        err += (e5 / sc).powi(2);
        err2 += (e3 / sc).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    h.abs() * err * (1.0 / (deno * N as f64)).sqrt()
}

// Hairer's DOP853 coefficients, stages 2..=12 (k[11] is the 12th stage).
const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

const A: [&[f64]; 11] = [
    &[5.26001519587677318785587544488E-2],
    &[1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2],
    &[2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2],
    &[
        2.41365134159266685502369798665E-1,
        0.0,
        -8.84549479328286085344864962717E-1,
        9.24834003261792003115737966543E-1,
    ],
    &[
        3.7037037037037037037037037037E-2,
        0.0,
        0.0,
        1.70828608729473871279604482173E-1,
        1.25467687566822425016691814123E-1,
    ],
    &[
        3.7109375E-2,
        0.0,
        0.0,
        1.70252211019544039314978060272E-1,
        6.02165389804559606850219397283E-2,
        -1.7578125E-2,
    ],
    &[
        3.70920001185047927108779319836E-2,
        0.0,
        0.0,
        1.70383925712239993810214054705E-1,
        1.07262030446373284651809199168E-1,
        -1.53194377486244017527936158236E-2,
        8.27378916381402288758473766002E-3,
    ],
    &[
        6.24110958716075717114429577812E-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825E0,
        -8.68219346841726006818189891453E-1,
        2.75920996994467083049415600797E1,
        2.01540675504778934086186788979E1,
        -4.34898841810699588477366255144E1,
    ],
    &[
        4.77662536438264365890433908527E-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468E0,
        -5.90290826836842996371446475743E-1,
        2.12300514481811942347288949897E1,
        1.52792336328824235832596922938E1,
        -3.32882109689848629194453265587E1,
        -2.03312017085086261358222928593E-2,
    ],
    &[
        -9.3714243008598732571704021658E-1,
        0.0,
        0.0,
        5.18637242884406370830023853209E0,
        1.09143734899672957818500254654E0,
        -8.14978701074692612513997267357E0,
        -1.85200656599969598641566180701E1,
        2.27394870993505042818970056734E1,
        2.49360555267965238987089396762E0,
        -3.0467644718982195003823669022E0,
    ],
    &[
        2.27331014751653820792359768449E0,
        0.0,
        0.0,
        -1.05344954667372501984066689879E1,
        -2.00087205822486249909675718444E0,
        -1.79589318631187989172765950534E1,
        2.79488845294199600508499808837E1,
        -2.85899827713502369474065508674E0,
        -8.87285693353062954433549289258E0,
        1.23605671757943030647266201528E1,
        6.43392746015763530355970484046E-1,
    ],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566E0,
    1.89151789931450038304281599044E0,
    -5.8012039600105847814672114227E0,
    3.1116436695781989440891606237E-1,
    -1.52160949662516078556178806805E-1,
    2.01365400804030348374776537501E-1,
    4.47106157277725905176885569043E-2,
];

const BHH: [f64; 3] = [
    0.244094488188976377952755905512E+00,
    0.733846688281611857341361741547E+00,
    0.220588235294117647058823529412E-01,
];

const E5: [f64; 12] = [
    0.1312004499419488073250102996E-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753E+01,
    -0.4957589496572501915214079952E+00,
    0.1664377182454986536961530415E+01,
    -0.3503288487499736816886487290E+00,
    0.3341791187130174790297318841E+00,
    0.8192320648511571246570742613E-01,
    -0.2235530786388629525884427845E-01,
];

/// Samples `(x, y(x))` of a real two-component solution.
pub type Trajectory = Vec<(f64, RealState2)>;

/// Integrates an arbitrary two-component system with the spec's dense stride.
pub fn integrate<F>(
    system: F,
    x0: f64,
    x1: f64,
    y0: RealState2,
    spec: &IntegratorSpec,
) -> Result<Trajectory>
where
    F: Fn(f64, RealState2) -> RealState2,
{
    spec.validate()?;
    let mut out = Vec::new();
    let f = |x: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
        *dy = system(x, RealState2::from_array(*y)).to_array();
    };
    solve(
        &f,
        x0,
        x1,
        y0.to_array(),
        spec,
        Output::Scaled(spec.dense_output_stride),
        |x, y| out.push((x, RealState2::from_array(*y))),
    )?;
    Ok(out)
}

/// Flow of the unperturbed periodic system from `x0` to `x1`.
pub fn propagate_unperturbed(
    coeffs: &Coefficients,
    lambda: f64,
    x0: f64,
    x1: f64,
    y0: RealState2,
    spec: &IntegratorSpec,
) -> Result<RealState2> {
    let f = |x: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
        *dy = unperturbed_rhs(coeffs, lambda, x, RealState2::from_array(*y)).to_array();
    };
    let (y, _) = solve(&f, x0, x1, y0.to_array(), spec, Output::Ends, |_, _| {})?;
    Ok(RealState2::from_array(y))
}

/// Flow of the perturbed system from `x0` to `x1`.
pub fn propagate_perturbed(
    coeffs: &Coefficients,
    v: &dyn Potential,
    lambda: f64,
    x0: f64,
    x1: f64,
    y0: RealState2,
    spec: &IntegratorSpec,
) -> Result<RealState2> {
    let f = |x: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
        *dy = perturbed_rhs(coeffs, v, lambda, x, RealState2::from_array(*y)).to_array();
    };
    let (y, _) = solve(&f, x0, x1, y0.to_array(), spec, Output::Ends, |_, _| {})?;
    Ok(RealState2::from_array(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::Coefficients;
    use std::f64::consts::PI;

    fn free(lambda: f64) -> impl Fn(f64, RealState2) -> RealState2 {
        move |x, y| unperturbed_rhs(&Coefficients::free(), lambda, x, y)
    }

    #[test]
    fn free_rotation_closed_form() {
        let spec = IntegratorSpec::default();
        let traj = integrate(free(PI), 0.0, 1.0, RealState2::new(1.0, 0.0), &spec).unwrap();
        let (x, y) = *traj.last().unwrap();
        assert_eq!(x, 1.0);
        assert!((y.y1 + 1.0).abs() < 1e-9 && y.y2.abs() < 1e-9);
        for &(x, y) in &traj {
            assert!((y.y1 - (PI * x).cos()).abs() < 1e-9);
            assert!((y.y2 + (PI * x).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_interval_returns_initial_state() {
        let y0 = RealState2::new(0.3, -0.8);
        let traj = integrate(free(2.0), 0.7, 0.7, y0, &IntegratorSpec::default()).unwrap();
        assert_eq!(traj, vec![(0.7, y0)]);
    }

    #[test]
    fn constant_mass_matches_exponential() {
        // p = 1, lambda = 2: y1'' = -3 y1, y2 = y1' / 3.
        let spec = IntegratorSpec::default();
        let c = Coefficients::constant_mass(1.0);
        let y = propagate_unperturbed(&c, 2.0, 0.0, 1.0, RealState2::new(1.0, 0.0), &spec).unwrap();
        let w = 3f64.sqrt();
        assert!((y.y1 - w.cos()).abs() < 1e-9);
        assert!((y.y2 + w.sin() / w).abs() < 1e-9);
    }

    #[test]
    fn backward_then_forward_returns() {
        let spec = IntegratorSpec::default();
        let c = Coefficients::constant_mass(0.5);
        let y0 = RealState2::new(0.2, 1.1);
        let y1 = propagate_unperturbed(&c, 1.7, 0.0, 7.3, y0, &spec).unwrap();
        let back = propagate_unperturbed(&c, 1.7, 7.3, 0.0, y1, &spec).unwrap();
        assert!((back.y1 - y0.y1).abs() < 10.0 * spec.rel_tol * 10.0);
        assert!((back.y2 - y0.y2).abs() < 10.0 * spec.rel_tol * 10.0);
    }

    #[test]
    fn uniform_output_hits_grid_exactly() {
        let spec = IntegratorSpec::default();
        let mut xs = Vec::new();
        let f = |_x: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0];
        solve(&f, 0.0, 1.0, [1.0], &spec, Output::Uniform(0.125), |x, _| xs.push(x)).unwrap();
        let expect: Vec<f64> = (0..=8).map(|i| i as f64 * 0.125).collect();
        assert_eq!(xs, expect);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let spec = IntegratorSpec::default();
        let f = |_x: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * y[0];
        // Blows up at x = 1.
        let err = solve(&f, 0.0, 2.0, [1.0], &spec, Output::Ends, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. } | Error::StepSizeUnderflow { .. }));
    }

    #[test]
    fn rejects_bad_tolerances() {
        let spec = IntegratorSpec {
            rel_tol: 1e-2,
            ..IntegratorSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
