//! `coaxres`: simulate, synthesize, fit and calibrate coaxial-cable resonator
//! reflection traces from the command line.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coaxres_core::dataio::ConfigDocument;

#[derive(Debug, Parser)]
#[command(name = "coaxres", version, about = "Coaxial-cable resonator modelling and fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration document (defaults apply when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input trace (.s1p or .csv); repeatable.
    #[arg(long = "in", global = true)]
    pub inputs: Vec<PathBuf>,
    /// Output trace, summary or report directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dotted-key override, e.g. topology.splice.r_cont=6e-4; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Lower band edge, Hz.
    #[arg(long, global = true)]
    pub fmin: Option<f64>,
    /// Upper band edge, Hz.
    #[arg(long, global = true)]
    pub fmax: Option<f64>,
    /// Grid points (total for a uniform grid, per mode for mode windows).
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Noise seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noiseless model sweep of the configured topology.
    Simulate,
    /// Model sweep with the configured noise.
    Synth,
    /// List reflection dips in a trace.
    Find,
    /// Fit the deepest resonance of a trace.
    Fit,
    /// Fit every mode, from a trace or from the model.
    Survey,
    /// Mode frequency residuals against a constant free spectral range.
    Fsr {
        /// Free spectral range, Hz; fitted from the modes when omitted.
        #[arg(long)]
        fsr: Option<f64>,
    },
    /// Fit the splice contact resistance.
    CalibrateSplice,
    /// Fit the chip contact and shunt resistances.
    CalibrateChip,
    /// Photon number and absorbed fraction per generator power.
    Photon,
    /// CSV plot data for fits, mode surveys, FSR residuals and power tables.
    Report,
}

impl Common {
    /// Config with the flag overrides applied after any `--set` pairs.
    pub fn load_config(&self) -> coaxres_core::Result<ConfigDocument> {
        let mut overrides = self.overrides.clone();
        if let Some(v) = self.fmin {
            overrides.push(format!("sweep.f_min={v:e}"));
        }
        if let Some(v) = self.fmax {
            overrides.push(format!("sweep.f_max={v:e}"));
        }
        if let Some(v) = self.points {
            overrides.push(format!("sweep.points={v}"));
        }
        if let Some(v) = self.seed {
            overrides.push(format!("noise.seed={v}"));
        }
        ConfigDocument::load_with_overrides(self.config.as_deref(), &overrides)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<coaxres_core::Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match cli.command {
        Command::Simulate => commands::simulate(c, false),
        Command::Synth => commands::simulate(c, true),
        Command::Find => commands::find(c),
        Command::Fit => commands::fit(c),
        Command::Survey => commands::survey(c),
        Command::Fsr { fsr } => commands::fsr(c, fsr),
        Command::CalibrateSplice => commands::calibrate_splice(c),
        Command::CalibrateChip => commands::calibrate_chip(c),
        Command::Photon => commands::photon(c),
        Command::Report => report::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
