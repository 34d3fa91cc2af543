//! `explosion-lab`: Feller explosion tests, Monte Carlo exit times, Lipschitz
//! reports and noise validation from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::{FellerArgs, LipschitzArgs, NoiseArgs, SimulateArgs, SweepArgs, XodeArgs};
use output::Format;

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNDETERMINED: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_NUMERIC: u8 = 70;

pub const SEED_ENV: &str = "EXPLOSION_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "explosion-lab", version, about, args_override_self = true)]
struct Cli {
    /// Flat `key = value` file; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output format (default: csv for xode, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file (default: stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Worker threads for ensembles and sweeps; does not affect results.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feller explosion test for one λ.
    Feller(FellerArgs),
    /// Feller test over a log-spaced λ grid, with figure data.
    Sweep(SweepArgs),
    /// Euler–Maruyama exit-time ensemble.
    Simulate(SimulateArgs),
    /// Local Lipschitz constants, falsification witnesses, X-equation report.
    Lipschitz(LipschitzArgs),
    /// Deterministic X-equation trajectory.
    Xode(XodeArgs),
    /// Wiener-increment statistics.
    ValidateNoise(NoiseArgs),
}

/// Settings shared by every subcommand.
pub struct Common {
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
}

/// Bad input caught before any computation; maps to exit code 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run() -> Result<u8, anyhow::Error> {
    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let args = config::merge(std::env::args_os().collect(), &names)
        .map_err(|e| usage(format!("{e:#}")))?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return Ok(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.workers == 0 {
        return Err(usage("--workers must be >= 1"));
    }
    let common = Common {
        format: cli.format,
        out: cli.out,
        seed: cli.seed.unwrap_or(0),
        workers: cli.workers,
    };
    log::info!("seed {} with {} worker(s)", common.seed, common.workers);
    match &cli.command {
        Command::Feller(a) => commands::feller(a, &common),
        Command::Sweep(a) => commands::sweep(a, &common),
        Command::Simulate(a) => commands::simulate(a, &common),
        Command::Lipschitz(a) => commands::lipschitz(a, &common),
        Command::Xode(a) => commands::xode(a, &common),
        Command::ValidateNoise(a) => commands::validate_noise(a, &common),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_NUMERIC)
            }
        }
    }
}
