//! `sublab`: batch driver for the coefficient checks, the grid solver, the
//! Monte Carlo engine and the verification suite.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "sublab",
    version,
    about = "Sublinear semigroups of controlled jump-diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `mc.seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the coefficient validators.
    Check,
    /// Solve the HJB equation on the grid.
    Solve,
    /// Estimate the value by Monte Carlo.
    Mc,
    /// Run the verification suite.
    Verify,
    /// List the bundled scenarios and their parameters.
    Scenarios,
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("SSL_THREADS") {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!(
                "SSL_THREADS must be a positive integer, got '{s}'"
            ))),
        },
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Command::Scenarios = cli.command {
        let list = commands::scenarios()?;
        println!("{}", serde_json::to_string_pretty(&list)?);
        return Ok(true);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let resolved = config::load(path)?.resolve(cli.out.clone(), cli.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let outcome = pool.install(|| match cli.command {
        Command::Check => commands::check(&resolved),
        Command::Solve => commands::solve_cmd(&resolved),
        Command::Mc => commands::mc_cmd(&resolved),
        Command::Verify => commands::verify_cmd(&resolved).map(|(o, _)| o),
        Command::Scenarios => unreachable!(),
    })?;
    if !cli.quiet || !outcome.pass {
        println!("{}", outcome.message);
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sublab: {e}");
            e.exit_code()
        }
    }
}
