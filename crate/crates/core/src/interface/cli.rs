//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::export::{metrics_line, ExportBundle};
use super::server::{serve, ServerConfig, DEFAULT_BIND};
use crate::error::{Error, Result};
use crate::federate::{DataSources, RoundMetrics, RunOptions, Simulation, SimulationConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "qflsim", version, about = "Quantum and classical federated learning simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation from a JSON config and write its result bundle.
    Run(RunArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for metrics.csv, parameters.json, config.json, run.log.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plain line output only, no progress hints.
    #[arg(long)]
    pub headless: bool,
    /// Worker threads for client training.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record per-round wall time. Off by default: wall_time_ms is written
    /// as 0 and identical runs export identical bytes.
    #[arg(long)]
    pub wall_time: bool,
    /// Directory holding the subset datasets.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = DEFAULT_BIND)]
    pub bind: std::net::SocketAddr,
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Built dashboard to serve at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub max_concurrent_runs: usize,
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::Run(args) => run_command(&args),
        Command::Serve(args) => serve_command(args),
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Dimension { .. } | Error::Parse { .. } => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

fn report(e: &Error) {
    match e {
        Error::Validation(errs) => {
            eprintln!("error: invalid configuration");
            for fe in errs {
                eprintln!("  {}: {}", fe.field, fe.message);
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn read_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SimulationConfig::from_json(&text)
}

/// Executes `run`; returns the process exit code.
pub fn run_command(args: &RunArgs) -> u8 {
    match execute(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e);
            match e {
                Error::Io { .. } if !args.config.exists() => EXIT_INVALID,
                ref other => exit_code(other),
            }
        }
    }
}

fn execute(args: &RunArgs) -> Result<()> {
    let mut config = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let sources = DataSources {
        data_dir: args.data_dir.clone().unwrap_or_else(crate::data::default_data_dir),
        upload_dir: None,
    };
    let corpus = config.dataset.load(&sources)?;
    let options = RunOptions {
        client_threads: args.threads,
        record_wall_time: args.wall_time,
    };
    let mut sim = Simulation::new(config.clone(), corpus, options)?;
    if !args.headless {
        eprintln!(
            "running {} rounds with {} clients; writing results to {}",
            config.global_rounds,
            config.num_clients,
            args.out.display()
        );
    }

    let total = config.global_rounds;
    let mut log = String::new();
    let mut sink = |m: &RoundMetrics| {
        let line = metrics_line(m, total);
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    };
    let outcome = sim.run(&mut sink, None)?;
    log.push_str("status COMPLETED\n");
    ExportBundle::new(&config, &outcome.history, &outcome.global.parameters, log)?.write_dir(&args.out)
}

fn serve_command(args: ServeArgs) -> u8 {
    let config = ServerConfig {
        bind: args.bind,
        runs_dir: args.runs_dir,
        data_dir: args.data_dir.unwrap_or_else(crate::data::default_data_dir),
        assets_dir: args.assets,
        max_concurrent_runs: args.max_concurrent_runs,
        ..ServerConfig::default()
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match rt.block_on(serve(config)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e);
            EXIT_RUNTIME
        }
    }
}
