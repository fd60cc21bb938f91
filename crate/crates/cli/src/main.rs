use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use evolve_surf_cli::output::write_outputs;
use evolve_surf_cli::config::parse_config;
use evolve_surf_cli::{run_pipeline, Command};

#[derive(Parser)]
#[command(name = "evolve-surf", version, about = "Diffusion on an evolving surface chart")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// INI-style run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed for the constant estimators (overrides `[solver] seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Write A, L and the B parts in coordinate format.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Evaluate the smallness conditions and horizons.
    Check(Common),
    /// Direct time stepping with energy and decay diagnostics.
    Solve(Common),
    /// Picard iteration compared with the direct solve.
    Picard(Common),
    /// Geometry, operator and oracle self-checks.
    Verify(Common),
    /// Manufactured-solution convergence study.
    Mms(Common),
}

fn run(cli: Cli) -> Result<bool> {
    let (command, common) = match cli.command {
        Sub::Check(c) => (Command::Check, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Picard(c) => (Command::Picard, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Mms(c) => (Command::Mms, c),
    };
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let mut config = parse_config(&text).with_context(|| format!("parsing {}", common.config.display()))?;
    if let Some(dir) = common.out {
        config.output.directory = dir;
    }
    if let Some(seed) = common.seed {
        config.solver.seed = seed;
    }
    config.output.dump_matrices |= common.dump_matrices;

    let report = run_pipeline(&config, command)?;
    let manifest = write_outputs(&report, &config, &config.output.directory)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else if c.hard { "FAIL" } else { "WARN" };
        println!("{status} {} = {:e} ({})", c.name, c.value, c.limit);
    }
    println!("wrote {} files to {}", manifest.len(), config.output.directory.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
