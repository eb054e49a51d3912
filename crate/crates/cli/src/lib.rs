//! Experiment runner: reads a TOML config, builds a trimmed problem, runs
//! one or more solvers and writes CSV trajectories and JSON summaries.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] smart_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "smart", version, about = "Trimmed estimation with SMART and baseline solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `[solver] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one solver; writes trajectory.csv and summary.json.
    Run(Common),
    /// Run several solvers on the same problem; writes comparison.csv.
    Compare(Common),
    /// Write a synthetic dataset (data.csv) and its outlier mask (truth.csv).
    Gen(Common),
    /// Fit a homography with restarts; writes homography.csv and kept.csv.
    Homography(Common),
}

pub fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let (common, which) = match &cli.command {
        Command::Run(c) => (c, "run"),
        Command::Compare(c) => (c, "compare"),
        Command::Gen(c) => (c, "gen"),
        Command::Homography(c) => (c, "homography"),
    };
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }
    let out = common.out.as_deref();
    match which {
        "run" => commands::cmd_run(&cfg, out),
        "compare" => commands::cmd_compare(&cfg, out),
        "gen" => commands::cmd_gen(&cfg, out),
        _ => commands::cmd_homography(&cfg, out),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
