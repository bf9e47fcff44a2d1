mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "qtransport", version, about = "Quantum transport on tight-binding networks and their RLC circuit analogues")]
struct Cli {
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset or custom system and write trajectories and metrics.
    Run(ConfigArgs),
    /// Write component and DAC-code tables for the configured circuit.
    Synth(ConfigArgs),
    /// Average disorder realizations of the Anderson chain.
    Ensemble(ConfigArgs),
    /// List bundled presets and their default parameters.
    Presets,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (TOML, or JSON such as a provenance.json).
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: `out` from the config, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disorder seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<(RunConfig, PathBuf)> {
        let path = self
            .config
            .as_ref()
            .or(self.path.as_ref())
            .ok_or_else(|| CliError::config("no config file given"))?;
        let mut cfg = config::load(path)?;
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg.resolve()?, out))
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = args.load()?;
            commands::run(&cfg, &out)
        }
        Command::Synth(args) => {
            let (cfg, out) = args.load()?;
            commands::synth(&cfg, &out)
        }
        Command::Ensemble(args) => {
            let (cfg, out) = args.load()?;
            commands::ensemble(&cfg, &out)
        }
        Command::Presets => commands::presets(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
