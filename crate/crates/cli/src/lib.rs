//! Config-driven experiment runner for `seirs-threshold`.

pub mod config;
mod run;

use std::fmt::Display;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{parse_config, Command, ExperimentConfig};
pub use run::{execute, run, RunSummary, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] seirs_threshold::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(path: &str, reason: impl Display) -> Self {
        CliError::Config(format!("{path}: {reason}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "seirs", version, about = "Threshold experiments for non-autonomous SEIRS models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Disable closed-form shortcuts.
    #[arg(long, global = true)]
    pub force_general_path: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CliCommand {
    /// Integrate the model and write `trajectory.csv`.
    Simulate,
    /// Threshold report per window length, written to `report.csv`.
    Thresholds,
    /// Classify a two-axis parameter grid into `region.csv`.
    Sweep,
    /// Perturbation deltas against the robustness bound, in `robustness.csv`.
    Robustness,
    /// Check the incidence hypotheses, written to `hypotheses.csv`.
    VerifyIncidence,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Thresholds => Command::Thresholds,
            CliCommand::Sweep => Command::Sweep,
            CliCommand::Robustness => Command::Robustness,
            CliCommand::VerifyIncidence => Command::VerifyIncidence,
        }
    }
}

/// Reads and normalizes the config named on the command line, applying the
/// flag overrides.
pub fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    let command = Command::from(cli.command);
    match cfg.command {
        Some(c) if c != command => {
            return Err(CliError::config(
                "command",
                format!("config is for `{}`, invoked as `{}`", c.as_str(), command.as_str()),
            ))
        }
        _ => cfg.command = Some(command),
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if cli.force_general_path {
        cfg.threshold.force_general_path = true;
    }
    cfg.normalize()
}

/// Parses, runs, and maps the result to an exit code.
pub fn main_with(cli: Cli) -> u8 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let outcome = load(&cli).and_then(run);
    match outcome {
        Ok(summary) => {
            for line in summary.lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
