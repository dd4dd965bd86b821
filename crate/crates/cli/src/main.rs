//! `qw`: command-line driver for the qw-core toolkit.

// NaN must fail the tolerance checks, hence `!(x <= tol)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qw_core::io::Manifest;
use qw_core::numerics::Rational;

use crate::settings::{resolve, SettingsError};

#[derive(Parser, Debug)]
#[command(name = "qw", version, about = "Exact spectral toolkit for the heavy/light particle model")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Model and run settings shared by every subcommand. A config file overrides these flags.
#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Half-odd s >= 3/2, e.g. 3/2
    #[arg(long, global = true, value_parser = parse_rational_arg)]
    #[serde(serialize_with = "ser_opt_rational")]
    pub s: Option<Rational>,
    /// Oscillator strength w > 0 (rational)
    #[arg(long, global = true, value_parser = parse_rational_arg)]
    #[serde(serialize_with = "ser_opt_rational")]
    pub w: Option<Rational>,
    /// Number of light particles on each side
    #[arg(long = "N", global = true)]
    pub n_bodies: Option<u32>,
    /// Mass ratio m/M (rational)
    #[arg(long, global = true, value_parser = parse_rational_arg)]
    #[serde(serialize_with = "ser_opt_rational")]
    pub r: Option<Rational>,
    /// Inverse temperature of the Gibbs-like ensemble (rational, >= 0)
    #[arg(long, global = true, value_parser = parse_rational_arg)]
    #[serde(serialize_with = "ser_opt_rational")]
    pub beta: Option<Rational>,
    /// RNG seed for ensemble draws (default 12345)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Working precision in bits; QW_PRECISION_BITS takes priority
    #[arg(long, global = true)]
    pub precision_bits: Option<usize>,
    /// JSON config file; its fields override the flags above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Exact eigenvalues and polynomial coefficients: spectrum.csv
    Spectrum(commands::SpectrumArgs),
    /// Finite-difference eigenvalues against the closed form: oracle.csv
    OracleEig(commands::OracleArgs),
    /// Normalized one-variable matrix elements: matelem.csv
    Matelem(commands::MatelemArgs),
    /// Direct and integral forms of S1, S2, S3: series.csv
    Series(commands::SeriesArgs),
    /// Partial sums of the BML divergence series: bml.csv
    Bml(commands::BmlArgs),
    /// First-order level splitting: splitting.csv
    Perturb(commands::PerturbArgs),
    /// Heavy-particle trajectory and MSD: trajectory.csv, msd.csv
    Trajectory(commands::TrajectoryArgs),
    /// Diffusion criterion on an MSD curve: diffusion.json
    Diffusion(commands::DiffusionArgs),
    /// Dispersion scaling and cat verdicts: dispersion.csv, cats.csv
    Cats(commands::CatsArgs),
    /// Droplet scenario N, r, rN: scenario.json
    Scenario(commands::ScenarioArgs),
    /// Einstein, Langevin and Perrin reference curves: baselines.csv, baselines.json
    Baselines(commands::BaselinesArgs),
    /// Full invariant suite: validate.csv
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::OracleEig(_) => "oracle-eig",
            Command::Matelem(_) => "matelem",
            Command::Series(_) => "series",
            Command::Bml(_) => "bml",
            Command::Perturb(_) => "perturb",
            Command::Trajectory(_) => "trajectory",
            Command::Diffusion(_) => "diffusion",
            Command::Cats(_) => "cats",
            Command::Scenario(_) => "scenario",
            Command::Baselines(_) => "baselines",
            Command::Validate => "validate",
        }
    }
}

fn parse_rational_arg(text: &str) -> Result<Rational, String> {
    qw_core::numerics::parse_rational(text).map_err(|e| e.to_string())
}

fn ser_opt_rational<S: serde::Serializer>(x: &Option<Rational>, ser: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(r) => ser.serialize_some(&qw_core::numerics::format_rational(r)),
        None => ser.serialize_none(),
    }
}

/// What a command reports besides its files.
pub struct Report {
    pub outputs: Vec<String>,
    /// `Some(reason)` when a checked criterion failed.
    pub failure: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let settings = match resolve(&cli.global) {
        Ok(s) => s,
        Err(SettingsError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let out = cli.global.out.clone();
    let result = commands::run(&cli.command, &settings, &out);
    let (status, code, outputs) = match &result {
        Ok(Report { outputs, failure: None }) => ("ok".to_string(), 0, outputs.clone()),
        Ok(Report { outputs, failure: Some(why) }) => {
            eprintln!("criterion failed: {why}");
            (format!("criterion failed: {why}"), 1, outputs.clone())
        }
        Err(e) => {
            eprintln!("error: {e}");
            (format!("error: {e}"), 1, Vec::new())
        }
    };
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        version: format!("qw {}", env!("CARGO_PKG_VERSION")),
        seed: settings.seed,
        precision_bits: settings.precision_bits,
        inputs: serde_json::json!({
            "settings": settings::describe(&settings),
            "flags": &cli.global,
            "args": &cli.command,
        }),
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        status,
    };
    if let Err(e) = manifest.write(&out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
