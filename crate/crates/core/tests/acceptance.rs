use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use floquet_embed::floquet::{derived_data, floquet_solution, gamma_derivative, monodromy, quasimomentum};
use floquet_embed::integrate::{propagate_perturbed, solve, Output};
use floquet_embed::pruefer::{from_prufer, prufer_rhs, r_xi_rhs, to_prufer, PrueferState};
use floquet_embed::synth::{
    assemble, check_nonresonance, schedule, write_potential_csv, EmbeddingTarget, Envelope, Manifest, PieceSpec,
    ScheduleMode, ScheduleOptions, Side, SynthesizedPotential, DEFAULT_CHECKPOINT_SPACING,
};
use floquet_embed::verify::{
    adversarial_nonembedding, decay_check, l2_tail_estimate, oscillatory_check_41, oscillatory_check_42_unchecked,
    oscillatory_check_target, stability_check, stability_scan, verify_synthesis, Drive, PieceTrack, Trig,
    VerifyOptions,
};
use floquet_embed::{Coefficients, IntegratorSpec, PeriodicCoefficient, RealState2};

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n:>2}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn spec() -> IntegratorSpec {
    IntegratorSpec::default()
}

fn mixed_coeffs() -> Coefficients {
    Coefficients::new(
        PeriodicCoefficient::new(0.3, vec![0.2], vec![0.0]),
        PeriodicCoefficient::new(0.0, vec![0.0], vec![0.15]),
    )
}

fn random_coeffs(rng: &mut StdRng) -> Coefficients {
    let mut coef = |n: usize| (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect::<Vec<f64>>();
    let (pc, ps, qc, qs) = (coef(2), coef(2), coef(2), coef(2));
    let p0 = rng.gen_range(-0.5..0.5);
    Coefficients::new(PeriodicCoefficient::new(p0, pc, ps), PeriodicCoefficient::new(0.0, qc, qs))
}

/// Five energies with quasimomentum in `[0.2, pi - 0.2]`, spread over the first bands.
fn in_band_lambdas(coeffs: &Coefficients) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = 0.05;
    while out.len() < 5 && l < 12.0 {
        let m = monodromy(coeffs, l, &spec()).unwrap();
        if let Some(k) = quasimomentum(&m).k() {
            if (0.2..=PI - 0.2).contains(&k) {
                out.push(l);
                l += 0.9;
                continue;
            }
        }
        l += 0.01;
    }
    out
}

fn targets(coeffs: &Coefficients, ls: &[f64]) -> Vec<EmbeddingTarget> {
    check_nonresonance(ls, coeffs, 0.02, 0.05, 5.0, &spec()).unwrap()
}

fn finite_options() -> ScheduleOptions {
    ScheduleOptions::default()
}

#[test]
fn c01_monodromy_trace_matches_closed_form() {
    let mut worst: f64 = 0.0;
    for m in [0.0, 1.0] {
        let coeffs = if m == 0.0 { Coefficients::free() } else { Coefficients::constant_mass(m) };
        for i in 0..50 {
            let l = -5.0 + 10.0 * (i as f64 + 0.5) / 50.0;
            let d = l * l - m * m;
            let exact = if d >= 0.0 { 2.0 * d.sqrt().cos() } else { 2.0 * (-d).sqrt().cosh() };
            let tr = monodromy(&coeffs, l, &spec()).unwrap().trace();
            worst = worst.max((tr - exact).abs());
        }
    }
    let pass = worst <= 1e-8;
    report(1, pass, format!("max |trace - closed form| = {worst:.3e} (tol 1e-8)"));
    assert!(pass);
}

#[test]
fn c02_floquet_solution_invariants() {
    let mut rng = StdRng::seed_from_u64(20240601);
    let (mut w_omega, mut w_floquet, mut min_psi, mut w_fd) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let mut count = 0;
    for _ in 0..10 {
        let coeffs = random_coeffs(&mut rng);
        let ls = in_band_lambdas(&coeffs);
        assert_eq!(ls.len(), 5, "not enough in-band energies");
        for l in ls {
            let sol = floquet_solution(&coeffs, l, &spec()).unwrap();
            count += 1;
            for (_, g) in sol.grid() {
                let omega = 2.0 * (g[0].conj() * g[1]).im;
                w_omega = w_omega.max((omega - sol.omega).abs());
            }
            let m = monodromy(&coeffs, l, &spec()).unwrap().m;
            let g0 = sol.g_at(0.0);
            let mu = sol.multiplier();
            for r in 0..2 {
                let mg = g0[0] * m[r][0] + g0[1] * m[r][1];
                w_floquet = w_floquet.max((mg - mu * g0[r]).norm());
            }
            min_psi = min_psi.min(derived_data(&sol).min_psi());
            let h = 1e-4;
            for _ in 0..20 {
                let x = rng.gen_range(2.0 * h..1.0 - 2.0 * h);
                let (d1, d2) = gamma_derivative(&sol, x);
                let g = |s: f64| sol.frame(x + s * h).gamma;
                let (p1, p2, m1, m2) = (g(1.0), g(2.0), g(-1.0), g(-2.0));
                let fd = |j: usize| (8.0 * (p1[j] - m1[j]) - (p2[j] - m2[j])) / (12.0 * h);
                w_fd = w_fd.max((fd(0) - d1).abs()).max((fd(1) - d2).abs());
            }
        }
    }
    let pass = w_omega <= 1e-8 && w_floquet <= 1e-8 && min_psi > 0.0 && w_fd <= 1e-6;
    report(
        2,
        pass,
        format!(
            "{count} solutions: omega drift {w_omega:.2e}, |Mg - e^ik g| {w_floquet:.2e}, min Psi {min_psi:.3}, \
             phase derivative error {w_fd:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn c03_prufer_round_trip_and_dual_path() {
    let mut rng = StdRng::seed_from_u64(7);
    let coeffs = mixed_coeffs();
    let sol = floquet_solution(&coeffs, 1.7, &spec()).unwrap();
    let mut w_round: f64 = 0.0;
    for _ in 0..1000 {
        let x = rng.gen_range(-50.0..50.0);
        let y = RealState2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let back = from_prufer(&to_prufer(y, &sol, x, None).unwrap(), &sol, x);
        w_round = w_round.max((back.y1 - y.y1).hypot(back.y2 - y.y2) / y.norm());
    }

    let v = |x: f64| 0.8 * (2.0 * x).sin() / x;
    let (x0, x1) = (10.0, 1e3);
    let tight = spec().scaled_tolerances(1e-2);
    let y0 = RealState2::new(0.3, -0.7);
    let start = to_prufer(y0, &sol, x0, None).unwrap();
    let direct = propagate_perturbed(&coeffs, &v, sol.lambda, x0, x1, y0, &tight).unwrap();
    let exact = to_prufer(direct, &sol, x1, None).unwrap();

    let f_xi = |x: f64, y: &[f64; 2], d: &mut [f64; 2]| {
        let (lr, xi) = r_xi_rhs(y[1], v(x), &sol, x);
        *d = [lr, xi];
    };
    let (yx, _) = solve(&f_xi, x0, x1, [start.r.ln(), start.xi], &tight, Output::Ends, |_, _| {}).unwrap();
    let f_th = |x: f64, y: &[f64; 2], d: &mut [f64; 2]| {
        let st = PrueferState::from_r_eta(1.0, y[1] - sol.frame(x).gamma[0], &sol, x);
        let dr = prufer_rhs(&st, v(x), &sol, x);
        *d = [dr.log_r, dr.theta1];
    };
    let (yt, _) = solve(&f_th, x0, x1, [start.r.ln(), start.theta1], &tight, Output::Ends, |_, _| {}).unwrap();
    let wrap = |a: f64| (a - TAU * (a / TAU).round()).abs();
    let e_xi = (yx[0] - exact.r.ln()).abs().max(wrap(yx[1] - exact.xi));
    let e_th = (yt[0] - exact.r.ln()).abs().max(wrap(yt[1] - exact.theta1));
    let pass = w_round <= 1e-10 && e_xi <= 1e-6 && e_th <= 1e-6;
    report(
        3,
        pass,
        format!("round trip {w_round:.2e} (tol 1e-10); paths vs direct: (R, xi) {e_xi:.2e}, (R, theta) {e_th:.2e} (tol 1e-6)"),
    );
    assert!(pass);
}

#[test]
fn c04_pointwise_identities() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut cases = vec![(Coefficients::free(), 0.7), (mixed_coeffs(), 1.7)];
    let extra = random_coeffs(&mut rng);
    let l = in_band_lambdas(&extra)[0];
    cases.push((extra, l));
    for (coeffs, l) in cases {
        let sol = floquet_solution(&coeffs, l, &spec()).unwrap();
        for _ in 0..10_000 {
            let x = rng.gen_range(-100.0..100.0);
            let fp = sol.frame(x);
            let theta1 = rng.gen_range(-10.0..10.0);
            let st = PrueferState::from_r_eta(1.0, theta1 - fp.gamma[0], &sol, x);
            let (a1, a2) = (fp.abs2[0], fp.abs2[1]);
            let (s1, s2) = (st.theta1.sin(), st.theta2.sin());
            let lhs = a1 * (2.0 * st.theta1).sin() - a2 * (2.0 * st.theta2).sin();
            worst = worst.max((lhs - fp.psi * st.xi.sin()).abs());
            let lhs2 = a1 * s1 * s1 - a2 * s2 * s2;
            worst = worst.max((lhs2 - 0.5 * (fp.abs2_diff() - fp.psi * st.xi.cos())).abs());
        }
    }
    let pass = worst <= 1e-10;
    report(4, pass, format!("max identity residual {worst:.2e} over 3 x 1e4 points (tol 1e-10)"));
    assert!(pass);
}

#[test]
fn c05_oscillatory_integrals() {
    let x0 = [1e2, 1e3, 1e4];
    let s = spec();
    let mut lines = Vec::new();
    let mut pass = true;
    for trig in [Trig::Sin, Trig::Cos] {
        let r = oscillatory_check_41(2.0, 1.0, 1.0, trig, &x0, 1e6, &s).unwrap();
        pass &= r.passed();
        lines.push(format!("41/{trig:?} spread {:.3}", r.spread));
    }
    let t = &targets(&mixed_coeffs(), &[1.7])[0];
    for trig in [Trig::Sin, Trig::Cos] {
        let r = oscillatory_check_target(t, trig, &x0, 1e6, &s).unwrap();
        pass &= r.passed();
        lines.push(format!("42 target/{trig:?} spread {:.3}", r.spread));
    }
    let control = oscillatory_check_42_unchecked(|t| 1.0 + (TAU * t).cos(), |_| 0.0, TAU, Trig::Sin, &x0, 1e6, &s)
        .unwrap();
    pass &= control.growth > 10.0;
    lines.push(format!("resonant control growth {:.1} (need > 10)", control.growth));
    report(5, pass, lines.join(", "));
    assert!(pass);
}

fn decay_piece(side: Side) -> PieceSpec {
    PieceSpec {
        side,
        target: 0,
        lambda: 0.7,
        a: 1e4,
        b: 0.0,
        x_end: 2.8e4,
        xi0: FRAC_PI_2,
        c: 210.0,
        taper_width: 1.0,
        active_count: 1,
    }
}

#[test]
fn c06_single_piece_decay() {
    let t = &targets(&Coefficients::free(), &[0.7])[0];
    let mut pass = true;
    let mut lines = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let r = decay_check(t, &decay_piece(side), 210.0, 5.0, &spec()).unwrap();
        let slope = r.fit.slope;
        let ok = (-115.0..=-95.0).contains(&slope) && r.fit.monotone && r.dual_path_error <= 1e-6 && r.passed();
        pass &= ok;
        lines.push(format!(
            "{side}: slope {slope:.2}, monotone {}, dual path {:.2e}",
            r.fit.monotone, r.dual_path_error
        ));
    }
    report(6, pass, lines.join("; "));
    assert!(pass);
}

#[test]
fn c07_bystander_stability() {
    let ts = targets(&Coefficients::free(), &[0.7, 1.3]);
    let piece = decay_piece(Side::Plus);
    let r = stability_check(&ts[0], &ts[1], &piece, 8, 0.02, &spec()).unwrap();
    let free = stability_scan(&ts[1], Drive::Free, piece.a, piece.x_end, 8, &spec()).unwrap();
    let free_worst = free.iter().map(|p| (p.0 - 1.0).abs()).fold(0.0, f64::max);
    let pass = r.worst_ratio <= 2.0 && r.passed() && free_worst == 0.0;
    report(
        7,
        pass,
        format!("worst ratio {:.4} at x = {:.0} (limit 2); free drive deviation {free_worst}", r.worst_ratio, r.worst_x),
    );
    assert!(pass);
}

fn finite_synthesis() -> (SynthesizedPotential, Vec<EmbeddingTarget>, ScheduleOptions) {
    let opts = finite_options();
    let ts = targets(&Coefficients::free(), &[0.7, 1.3]);
    let s = schedule(ts.clone(), opts.clone()).unwrap();
    (assemble(&s, 0.05, DEFAULT_CHECKPOINT_SPACING).unwrap(), ts, opts)
}

#[test]
fn c08_finite_two_target_synthesis() {
    let (pot, ts, opts) = finite_synthesis();
    let reports = verify_synthesis(&pot, &ts, &opts, &VerifyOptions::default()).unwrap();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let tails = reports.iter().filter(|r| r.name.starts_with("l2_tail/") && r.passed).count();
    let samples = pot.samples(1.0, 20_000).unwrap();
    let env = pot.envelope_ratio(&samples);
    let pass = failed.is_empty() && tails == 4 && env <= 1.0 + 1e-12;
    report(
        8,
        pass,
        format!("{} checks, failed {failed:?}, positive tails {tails}/4, envelope ratio {env:.6}", reports.len()),
    );
    assert!(pass);
}

#[test]
fn c09_adversarial_lower_bound() {
    let t = &targets(&mixed_coeffs(), &[1.7])[0];
    let r = adversarial_nonembedding(t, 0.4, 10.0, 1e5, 0.99, &spec()).unwrap();
    let pass = r.passed() && r.not_square_summable();
    report(
        9,
        pass,
        format!(
            "min R (x/x0)^(C eps) / R(x0) = {:.6} (factor 0.99), ln R(end) = {:.3}, not square summable {}",
            r.min_ratio,
            r.ln_r_end,
            r.not_square_summable()
        ),
    );
    assert!(pass);
}

#[test]
fn c10_growing_three_target_synthesis() {
    let ts = targets(&Coefficients::free(), &[0.7, 1.3, 2.0]);
    let opts = ScheduleOptions {
        mode: ScheduleMode::Growing {
            c_unit: 2.6,
            safety: 1.01,
            envelope: Envelope::LogE,
        },
        a0: 30.0,
        x_max: 1e8,
        integrator: IntegratorSpec {
            abs_tol: 1e-10,
            ..IntegratorSpec::default()
        },
        ..ScheduleOptions::default()
    };
    let s = schedule(ts.clone(), opts).unwrap();
    let h_ratio = s.tracks.iter().map(|t| t.h_ratio_max).fold(0.0, f64::max);
    let mut tails = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        for t in 0..ts.len() {
            let mut mine: Vec<PieceTrack> = s.tracks_for(side, t);
            mine.sort_by(|a, b| a.start.abs().total_cmp(&b.start.abs()));
            tails.push(l2_tail_estimate(t, side, &mine).map(|r| r.max_ratio).unwrap_or(f64::INFINITY));
        }
    }
    let positive = tails.iter().all(|&r| r <= 0.5);
    let pass = h_ratio <= 1.0 && positive;
    report(
        10,
        pass,
        format!(
            "{} intervals to x = {:.3e}, max |V|(1+|x|)/h = {h_ratio:.4}, tail ratios {:?}",
            s.intervals(),
            s.breakpoints.last().unwrap(),
            tails.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

fn csv_bytes(pot: &SynthesizedPotential) -> Vec<u8> {
    let mut out = Vec::new();
    write_potential_csv(&pot.samples(1.0, 20_000).unwrap(), &mut out).unwrap();
    out
}

#[test]
fn c11_deterministic_synthesis() {
    let (a, _, _) = finite_synthesis();
    let (b, _, _) = finite_synthesis();
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    a.write_manifest(&mut ma).unwrap();
    b.write_manifest(&mut mb).unwrap();
    let (ca, cb) = (csv_bytes(&a), csv_bytes(&b));
    let manifest: Manifest = serde_json::from_slice(&ma).unwrap();
    let rebuilt = SynthesizedPotential::from_manifest(manifest, &Coefficients::free()).unwrap();
    let cr = csv_bytes(&rebuilt);
    let pass = ma == mb && ca == cb && cr == ca;
    report(
        11,
        pass,
        format!(
            "manifest identical {}, csv identical {}, rebuilt csv identical {} ({} bytes)",
            ma == mb,
            ca == cb,
            cr == ca,
            ca.len()
        ),
    );
    assert!(pass);
}
