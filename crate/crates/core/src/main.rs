use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ruinbound::cli::{exit_code, run, Command};
use ruinbound::config::{Format, RunConfig};
use ruinbound::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    Policy,
    Frontier,
    Simulate,
    Check,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Optimal consumption and investment under a lifetime-ruin constraint.
#[derive(Debug, Parser)]
#[command(name = "ruinbound", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `out_path` from the config, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Simulation seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: &Args) -> Result<bool, Error> {
    let mut cfg = RunConfig::from_file(&args.config)?;
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    let command = match args.command {
        Cmd::Solve => Command::Solve,
        Cmd::Policy => Command::Policy,
        Cmd::Frontier => Command::Frontier,
        Cmd::Simulate => Command::Simulate,
        Cmd::Check => Command::Check,
    };
    let output = run(command, &cfg)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    let text = output.render(cfg.format)?;
    match args.out.as_ref().or(cfg.out_path.as_ref()) {
        Some(path) => fs::write(path, text).map_err(|e| {
            Error::InvalidParameter(format!("cannot write {}: {e}", path.display()))
        })?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(!output.failed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: check suite failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
