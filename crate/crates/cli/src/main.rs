mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

/// Floquet data, Prüfer checks and embedded-eigenvalue potentials for periodic Dirac operators.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the corresponding config keys.
#[derive(Args, Debug)]
struct Overrides {
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Comma-separated target energies.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    targets: Option<Vec<f64>>,
    #[arg(long, global = true)]
    a0: Option<f64>,
    #[arg(long, global = true)]
    x_max: Option<f64>,
    #[arg(long, global = true)]
    taper_width: Option<f64>,
    #[arg(long, global = true)]
    resonance_margin: Option<f64>,
    #[arg(long, global = true)]
    edge_margin: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan the band structure: bands.csv, band_edges.json.
    Bands,
    /// Floquet solution and derived data on one period: floquet.csv.
    Floquet {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
    },
    /// Synthesize the perturbation: potential.csv, manifest.json, schedule.csv, run_config.toml.
    Synth,
    /// Verify a manifest: reports.json, summary.csv.
    Verify {
        /// Defaults to `<output_dir>/manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Oscillatory integral checks: oscillatory.json, oscillatory.csv.
    Oscillatory,
}

fn load(o: Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = o.targets {
        cfg.targets = v;
    }
    if let Some(v) = o.a0 {
        cfg.synth.a0 = v;
    }
    if let Some(v) = o.x_max {
        cfg.synth.x_max = v;
    }
    if let Some(v) = o.taper_width {
        cfg.synth.taper_width = v;
    }
    if let Some(v) = o.resonance_margin {
        cfg.resonance_margin = v;
    }
    if let Some(v) = o.edge_margin {
        cfg.edge_margin = v;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.0))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load(cli.overrides)?;
    match cli.command {
        Command::Bands => commands::bands(&cfg),
        Command::Floquet { lambda } => commands::floquet(&cfg, lambda),
        Command::Synth => commands::synth(&cfg),
        Command::Verify { manifest } => commands::verify(&cfg, manifest),
        Command::Oscillatory => commands::oscillatory(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
