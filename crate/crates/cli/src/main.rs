use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snls_core::harness::{run_file, RunKind, RunOptions};

/// Spectral laboratory for stochastic nonlinear Schrodinger equations.
#[derive(Parser)]
#[command(name = "snls-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write its record, path and residuals.
    Simulate(Common),
    /// Run an ensemble of paths and summarise the decay statistics.
    Ensemble(Common),
    /// Fixed-point iteration of the mild form on a short horizon.
    Picard(Common),
    /// Step-size refinement study.
    Convergence(Common),
    /// Check the noise model against the standing assumptions.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, value_name = "N", env = "SNLS_LAB_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Simulate(c) => (RunKind::Simulate, c),
        Command::Ensemble(c) => (RunKind::Ensemble, c),
        Command::Picard(c) => (RunKind::Picard, c),
        Command::Convergence(c) => (RunKind::Convergence, c),
        Command::Validate(c) => (RunKind::Validate, c),
    };
    let options = RunOptions {
        kind: Some(kind),
        out: common.out,
        seed: common.seed,
        threads: common.threads,
    };
    match run_file(&common.config, &options) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "{}: wrote {} files to {} in {:.2}s",
                kind.name(),
                outcome.files.len(),
                outcome.out.display(),
                outcome.wall_time
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
