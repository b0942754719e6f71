use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use floquet_embed::floquet::{
    band_scan_with_step, derived_data, floquet_solution_with_margin, write_bands_csv, write_floquet_csv,
};
use floquet_embed::synth::{assemble, check_nonresonance, schedule, write_potential_csv, Manifest, SynthesizedPotential};
use floquet_embed::verify::{
    oscillatory_check_41, oscillatory_check_target, verify_synthesis, write_reports_json, write_summary_csv,
    CheckReport,
};
use floquet_embed::Error;

use crate::config::RunConfig;

/// Why a subcommand stopped; maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Some checks ran and failed.
    Checks(Vec<String>),
    Usage(String),
    Resonance(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Checks(_) | Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Resonance(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Checks(names) => write!(f, "{} check(s) failed: {}", names.len(), names.join(", ")),
            Failure::Usage(m) | Failure::Resonance(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ResonantPair { .. } | Error::ResonantFrequency { .. } => Failure::Resonance(e.to_string()),
            Error::InvalidParameter { .. } | Error::InGap { .. } | Error::BandEdge { .. } | Error::Json(_) => {
                Failure::Usage(e.to_string())
            }
            Error::ScanTooCoarse { .. } => Failure::Runtime(format!("{e} (lower `bands.step`)")),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>) -> Outcome {
    w.flush().map_err(|e| Failure::Runtime(e.to_string()))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Outcome {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w).map_err(|e| Failure::Runtime(e.to_string()))?;
    finish(w)
}

fn require_targets(cfg: &RunConfig) -> Outcome {
    if cfg.targets.is_empty() {
        return Err(Failure::Usage("no targets: set `targets` or pass --targets".into()));
    }
    Ok(())
}

fn check_outcome(reports: &[CheckReport]) -> Outcome {
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!("FAIL {}: {}", r.name, r.message);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

pub fn bands(cfg: &RunConfig) -> Outcome {
    let b = &cfg.bands;
    let bs = band_scan_with_step(
        &cfg.coefficients,
        (b.lambda_min, b.lambda_max),
        b.step,
        b.resolution,
        &cfg.integrator,
    )?;
    let mut w = create(&cfg.output_dir, "bands.csv")?;
    write_bands_csv(&bs, &mut w)?;
    finish(w)?;
    write_json(&cfg.output_dir, "band_edges.json", &json!({ "edges": bs.edges(), "bands": bs }))?;
    println!("{} band(s), {} edge(s)", bs.bands.len(), bs.edges().len());
    Ok(())
}

pub fn floquet(cfg: &RunConfig, lambda: f64) -> Outcome {
    let sol = floquet_solution_with_margin(&cfg.coefficients, lambda, &cfg.integrator, cfg.edge_margin)?;
    let data = derived_data(&sol);
    let mut w = create(&cfg.output_dir, "floquet.csv")?;
    write_floquet_csv(&sol, &data, &mut w)?;
    finish(w)?;
    println!("lambda {lambda}: k = {}, omega = {}, mean Psi = {}", sol.k, sol.omega, data.psi_mean);
    Ok(())
}

fn write_schedule_csv(dir: &Path, manifest: &Manifest) -> Outcome {
    let mut w = create(dir, "schedule.csv")?;
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    writeln!(w, "side,start,end,target,lambda,N,C").map_err(io)?;
    for p in &manifest.pieces {
        writeln!(w, "{},{},{},{},{},{},{}", p.side, p.a, p.x_end, p.target, p.lambda, p.active_count, p.c)
            .map_err(io)?;
    }
    finish(w)
}

fn write_potential(dir: &Path, pot: &SynthesizedPotential, cfg: &RunConfig) -> Outcome {
    let samples = pot.samples(cfg.synth.sample_stride, cfg.synth.max_samples_per_piece)?;
    let mut w = create(dir, "potential.csv")?;
    write_potential_csv(&samples, &mut w)?;
    finish(w)
}

pub fn synth(cfg: &RunConfig) -> Outcome {
    require_targets(cfg)?;
    let opts = cfg.schedule_options();
    let targets = check_nonresonance(
        &cfg.targets,
        &cfg.coefficients,
        cfg.resonance_margin,
        cfg.edge_margin,
        opts.decay_margin,
        &cfg.integrator,
    )?;
    let s = schedule(targets, opts)?;
    let pot = assemble(&s, cfg.edge_margin, cfg.synth.checkpoint_spacing)?;
    write_potential(&cfg.output_dir, &pot, cfg)?;
    let mut w = create(&cfg.output_dir, "manifest.json")?;
    pot.write_manifest(&mut w)?;
    finish(w)?;
    write_schedule_csv(&cfg.output_dir, &pot.manifest)?;
    let mut w = create(&cfg.output_dir, "run_config.toml")?;
    w.write_all(cfg.to_toml().as_bytes()).map_err(|e| Failure::Runtime(e.to_string()))?;
    finish(w)?;
    println!(
        "{} intervals, {} pieces, last breakpoint {}",
        s.intervals(),
        pot.manifest.pieces.len(),
        s.breakpoints.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

/// Rebuilds the potential stored in `manifest` and runs the verification suite,
/// measuring decay against the constants implied by the config.
pub fn verify(cfg: &RunConfig, manifest: Option<PathBuf>) -> Outcome {
    let path = manifest.unwrap_or_else(|| cfg.output_dir.join("manifest.json"));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed manifest {}: {e}", path.display())))?;
    let mut opts = cfg.schedule_options();
    opts.integrator = manifest.integrator;
    let targets = check_nonresonance(
        &manifest.targets,
        &cfg.coefficients,
        cfg.resonance_margin,
        manifest.edge_margin,
        opts.decay_margin,
        &manifest.integrator,
    )?;
    let pot = SynthesizedPotential::from_manifest(manifest, &cfg.coefficients)?;
    let reports = verify_synthesis(&pot, &targets, &opts, &cfg.verify_options())?;
    write_reports(&cfg.output_dir, "reports.json", "summary.csv", &reports)?;
    println!("{} checks, {} passed", reports.len(), reports.iter().filter(|r| r.passed).count());
    check_outcome(&reports)
}

fn write_reports(dir: &Path, json_name: &str, csv_name: &str, reports: &[CheckReport]) -> Outcome {
    let mut w = create(dir, json_name)?;
    write_reports_json(reports, &mut w)?;
    writeln!(w).map_err(|e| Failure::Runtime(e.to_string()))?;
    finish(w)?;
    let mut w = create(dir, csv_name)?;
    write_summary_csv(reports, &mut w)?;
    finish(w)
}

pub fn oscillatory(cfg: &RunConfig) -> Outcome {
    let o = &cfg.oscillatory;
    let mut reports = Vec::new();
    for &trig in &o.trig {
        let r = oscillatory_check_41(o.a, o.beta1, o.beta2, trig, &o.x0, o.x_max, &cfg.integrator)?;
        reports.push(CheckReport::from(&r));
    }
    if o.targets && !cfg.targets.is_empty() {
        let targets = check_nonresonance(
            &cfg.targets,
            &cfg.coefficients,
            cfg.resonance_margin,
            cfg.edge_margin,
            cfg.synth.decay_margin,
            &cfg.integrator,
        )?;
        for t in &targets {
            for &trig in &o.trig {
                let mut r = oscillatory_check_target(t, trig, &o.x0, o.x_max, &cfg.integrator)?;
                r.name = format!("{}/{}", r.name, t.lambda);
                reports.push(CheckReport::from(&r));
            }
        }
    }
    write_reports(&cfg.output_dir, "oscillatory.json", "oscillatory.csv", &reports)?;
    println!("{} checks, {} passed", reports.len(), reports.iter().filter(|r| r.passed).count());
    check_outcome(&reports)
}
