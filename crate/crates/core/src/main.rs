//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irsim::harness::{export, run_sweep, ExperimentConfig, ExportFormat, TrialKind};
use irsim::Error;

#[derive(Parser)]
#[command(
    name = "irsim",
    version,
    about = "IRS-aided downlink simulator: channel estimation, robust joint precoder/reflection design, seeded sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-estimation experiments (normalized MSE only, no solvers).
    Estimate(RunArgs),
    /// Single-user achievable-rate experiments (requires k_users = 1).
    SolveSu(RunArgs),
    /// Weighted sum-rate experiments via the multiuser solver (any k_users).
    SolveMu(RunArgs),
    /// Config-driven sweep with the solver route picked automatically.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count from the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file for the aggregated rows.
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.experiment.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: &Command) -> Result<(), Error> {
    let (args, kind) = match command {
        Command::Estimate(args) => (args, TrialKind::EstimateOnly),
        Command::SolveSu(args) => (args, TrialKind::Solve),
        Command::SolveMu(args) => (args, TrialKind::SolveForceMu),
        Command::Sweep(args) => (args, TrialKind::Solve),
    };
    let cfg = load_config(args)?;
    if matches!(command, Command::SolveSu(_)) && cfg.system.k_users != 1 {
        return Err(Error::Config(format!(
            "solve-su requires k_users = 1, got {}",
            cfg.system.k_users
        )));
    }
    let rows = run_sweep(&cfg, kind)?;
    export(&rows, &args.out, args.format.into())?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
