use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quenchlab::commands::{self, Common};

#[derive(Parser)]
#[command(name = "quenchlab", version, about = "Quenching experiments for the singular p-Laplacian absorption equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; for `verify`, the run directory to re-check.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Seed for randomized checks; replaces `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// `dotted.key=value`, applied before validation. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form bounds without simulating.
    Bounds,
    /// Run the configured experiment and write its files.
    Run,
    /// Re-check a stored run.
    Verify,
    /// Run the parameter grid of `[sweep]`.
    Sweep,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let common = Common {
        config: cli.config,
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
        overrides: cli.overrides,
    };
    let result = match cli.command {
        Command::Bounds => commands::bounds(&common),
        Command::Run => commands::run(&common),
        Command::Verify => commands::verify(&common),
        Command::Sweep => commands::sweep(&common),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
