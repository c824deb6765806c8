//! `gllab`: batch front-end for the Ginzburg-Landau laboratory.

mod compare;
mod config;
mod error;
mod output;
mod pipelines;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Status;

#[derive(Parser)]
#[command(name = "gllab", version, about = "Ginzburg-Landau normal-state, bifurcation and nodal-set runs")]
struct Cli {
    /// RNG seed for every randomized stage (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads for sweeps
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline of a TOML config and write its manifest and data files
    Run {
        config: PathBuf,
        /// output directory (overrides the config)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it
    Validate { config: PathBuf },
    /// Relative differences of the scalar outputs of two runs (manifest files or run directories)
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        /// only compare scalars whose name starts with this prefix
        #[arg(long)]
        only: Option<String>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(path)?;
    let s = seed.unwrap_or(cfg.seed);
    Ok(cfg.with_seed(s))
}

fn execute(cli: Cli) -> Result<Status, CliError> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = load(&config, cli.seed)?;
            if output.is_some() {
                cfg.output = output;
            }
            let manifest = pipelines::run(&cfg, threads)?;
            println!("{}", serde_json::to_string_pretty(&manifest.scalars)?);
            for f in &manifest.flags {
                eprintln!("flagged: {f}");
            }
            eprintln!("wrote {} files to {}", manifest.files.len(), cfg.output_dir().display());
            Ok(manifest.status)
        }
        Command::Validate { config } => {
            load(&config, cli.seed)?.validate()?;
            println!("{}: ok", config.display());
            Ok(Status::Success)
        }
        Command::Compare { a, b, rtol, only } => {
            let report = compare::compare(&compare::load(&a)?, &compare::load(&b)?, rtol, only.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.differences.is_empty() {
                Status::Success
            } else {
                Status::Flagged
            })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
