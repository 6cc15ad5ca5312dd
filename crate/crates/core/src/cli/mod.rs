//! The `pseudo-rehearsal` command line.
//!
//! Every command reads one TOML config (plus `--set key=value` overrides)
//! and writes `manifest.json`, `metrics/*.csv` and `artifacts/*` under
//! `<out_dir>/<run_id>/`.

mod commands;
mod config;
mod source;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{AgreementRow, CurveRow, Manifest, RunDir};
pub use config::{
    apply_override, BoundaryConfig, Config, DataConfig, GenerateConfig, ModelConfig, RehearseConfig,
    TrainOnSynthConfig,
};
pub use source::{DataKind, DataSpec};

use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "pseudo-rehearsal", version, about = "Pseudo-rehearsal experiments with genetically evolved data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Train a solver; writes a checkpoint and a per-epoch CSV.
    Train,
    /// Evolve and enrich synthetic data from a solver checkpoint.
    Generate,
    /// Learn a new task under one rehearsal scheme; writes a retention CSV.
    Rehearse,
    /// Train fresh networks on synthetic data, scored on real test data.
    TrainOnSynth,
    /// Agreement between networks trained on original and synthetic data.
    Agreement,
    /// Train a fresh network on the lowest-spread synthetic points.
    Boundary,
    /// Time each stage of the generation pipeline.
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Generate => "generate",
            Command::Rehearse => "rehearse",
            Command::TrainOnSynth => "train-on-synth",
            Command::Agreement => "agreement",
            Command::Boundary => "boundary",
            Command::Bench => "bench",
        }
    }
}

/// Run one command with a resolved config; returns the run directory.
pub fn execute(command: Command, cfg: &Config) -> Result<PathBuf> {
    if cfg.threads > 0 {
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    let mut out = RunDir::create(cfg.run_dir(command.name()))?;
    match command {
        Command::Train => commands::train(cfg, &mut out)?,
        Command::Generate => commands::generate(cfg, &mut out)?,
        Command::Rehearse => commands::rehearse(cfg, &mut out)?,
        Command::TrainOnSynth => commands::train_on_synth(cfg, &mut out)?,
        Command::Agreement => commands::agreement(cfg, &mut out)?,
        Command::Boundary => commands::boundary(cfg, &mut out)?,
        Command::Bench => commands::bench(cfg, &mut out)?,
    }
    out.finish(command.name(), cfg)
}

/// Parse arguments, load the config and run.
pub fn run<I, T>(args: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    execute(cli.command, &cfg)
}

/// Process exit code for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        "config" => 2,
        "io" => 3,
        "parse" => 4,
        "validation" => 5,
        "shape" => 6,
        _ => 7,
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = Config::load(cli.config.as_deref(), &cli.overrides).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
