use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdc_entangle::config::{parse_degradation, parse_delay_list, RunConfig};
use pdc_entangle::pipeline::{self, Overrides, Report};
use pdc_entangle::Result;

#[derive(Parser)]
#[command(version, about = "Delay-tunable polarization entanglement: JSA, 𝒟 sweeps, tomography")]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for count simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated delays in fs, e.g. `0,25.9,-25.9`.
    #[arg(long = "delay-fs", global = true, allow_hyphen_values = true)]
    delay_fs: Option<String>,
    /// Empirical degradation `SCALE,OFFSET_FS`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    degrade: Option<String>,
    /// Uniform diagonal background weight b.
    #[arg(long, global = true)]
    background: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the filtered joint spectral amplitude and report norm losses.
    Jsa,
    /// Evaluate 𝒟(τ), α, β and purity over the delay range.
    Sweep,
    /// Simulate or reconstruct 36-projection tomography.
    Tomo {
        #[command(subcommand)]
        mode: TomoMode,
    },
    /// Purity, concurrence, fidelity and 𝒟 of a density-matrix file.
    Metrics { matrix: Option<PathBuf> },
    /// Fit amplitude scale and time offset to measured `tau_fs re_D im_D` rows.
    Fit { observations: Option<PathBuf> },
}

#[derive(Subcommand)]
enum TomoMode {
    Simulate,
    Reconstruct { counts: Option<PathBuf> },
}

fn run(cli: Cli) -> Result<Report> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out,
        delays: cli.delay_fs.as_deref().map(parse_delay_list).transpose()?,
        degradation: cli.degrade.as_deref().map(parse_degradation).transpose()?,
        background: cli.background,
    };
    cfg.apply(&overrides)?;
    match cli.command {
        Command::Jsa => pipeline::cmd_jsa(&cfg),
        Command::Sweep => pipeline::cmd_sweep(&cfg),
        Command::Tomo { mode: TomoMode::Simulate } => pipeline::cmd_tomo_simulate(&cfg),
        Command::Tomo {
            mode: TomoMode::Reconstruct { counts },
        } => pipeline::cmd_tomo_reconstruct(&cfg, counts.as_deref()),
        Command::Metrics { matrix } => pipeline::cmd_metrics(&cfg, matrix.as_deref()),
        Command::Fit { observations } => pipeline::cmd_fit(&cfg, observations.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for l in &report.lines {
                println!("{l}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
