use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use timebin::Execution;
use timebin_cli::commands;
use timebin_cli::config::{ConfigError, ExperimentConfig, Format, Kind};

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "timebin", version, about = "Error-free Bell-pair distribution and repeater simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribute one pair over two random channels.
    Distribute(Args),
    /// Two segments joined by a Bell-state measurement.
    Repeater(Args),
    /// Vary one parameter over a grid.
    Sweep(Args),
    /// Closed-form rate against the KWD repeater.
    CompareKwd(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exit with status 1 if a result leaves its analytic band.
    #[arg(long)]
    check: bool,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

fn load_config(kind: Kind, args: &Args) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let config: ExperimentConfig = text.parse()?;
            if config.kind != kind {
                return Err(ConfigError::KindMismatch {
                    expected: kind,
                    found: config.kind,
                });
            }
            config
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(f) = args.format {
        config.format = f;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Distribute(a) => (Kind::Distribute, a),
        Command::Repeater(a) => (Kind::Repeater, a),
        Command::Sweep(a) => (Kind::Sweep, a),
        Command::CompareKwd(a) => (Kind::CompareKwd, a),
    };
    let config = match load_config(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    match run(&config, exec, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(config: &ExperimentConfig, exec: Execution, args: &Args) -> anyhow::Result<bool> {
    let output = commands::run(config, exec)?;
    match &args.out {
        Some(path) => fs::write(path, &output.bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&output.bytes)?,
    }
    for v in &output.violations {
        eprintln!("check failed: {v}");
    }
    Ok(!args.check || output.violations.is_empty())
}
