//! Command-line driver: reads a TOML run config, runs one experiment on a
//! sized thread pool and writes CSV tables plus `summary.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{json, Value};

pub use config::{Command, RunConfig};
pub use error::CliError;
use output::Output;

#[derive(Debug, Parser)]
#[command(name = "walklab", version, about = "Birkhoff sums of random walks with global observables")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, env = "WALKLAB_THREADS")]
    pub threads: Option<usize>,
}

const DEFAULT_OUT: &str = "walklab-out";

pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_toml("")?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    execute(&cfg, cli.command, &out, threads)
}

/// Run `command` with a parsed config; returns the summary that was written.
pub fn execute(cfg: &RunConfig, command: Command, out_dir: &Path, threads: usize) -> Result<Value, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Config(format!(
                "config is for '{}', not '{}'",
                c.name(),
                command.name()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut out = Output::new(out_dir, cfg.hash(), cfg.seed)?;
    let result = pool.install(|| match command {
        Command::Simulate => commands::simulate(cfg, &mut out),
        Command::Exact => commands::exact(cfg, &mut out),
        Command::OceanDemo => commands::ocean_demo(cfg, &mut out),
        Command::ChainSweep => commands::chain_sweep_cmd(cfg, &mut out),
        Command::LltReport => commands::llt(cfg, &mut out),
        Command::BetaFit => commands::beta_fit_cmd(cfg, &mut out),
    })?;
    let mut files = out.files().to_vec();
    files.push("summary.json".into());
    let summary = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": out.config_hash,
        "seed": out.seed,
        "files": files,
        "result": result,
    });
    out.summary(&summary)?;
    Ok(summary)
}
