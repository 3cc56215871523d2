//! `graphtv` command line: runs experiment presets, builds forest
//! decompositions, reports local rates and benchmarks the preconditioners.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "graphtv", version, about = "Graph total variation solvers with forest preconditioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an experiment preset and write trace CSVs plus a summary.
    Run(Common),
    /// Build a forest decomposition and report its nesting profile.
    Partition(Common),
    /// Report nesting, local rate and, for the small grid preset, the envelope.
    Analyze(Common),
    /// Compare preconditioners on every benchmark file of a directory.
    Bench(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(common: &Common) -> CliResult<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for s in &common.set {
        cfg.set(s)?;
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> CliResult<()> {
    let (common, run): (&Common, fn(&Config, &Path) -> CliResult<()>) = match command {
        Command::Run(c) => (c, commands::cmd_run),
        Command::Partition(c) => (c, commands::cmd_partition),
        Command::Analyze(c) => (c, commands::cmd_analyze),
        Command::Bench(c) => (c, commands::cmd_bench),
    };
    let cfg = load_config(common)?;
    std::fs::create_dir_all(&common.out).map_err(|e| {
        CliError::BadInput(format!("cannot create output directory {}: {e}", common.out.display()))
    })?;
    run(&cfg, &common.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
