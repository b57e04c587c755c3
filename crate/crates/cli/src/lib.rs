//! The `engage` pipeline: synthetic data generation, ingestion and
//! filtering, stance detection, the state-level law model, individual
//! attendance prediction and per-side term rankings.
//!
//! Every command reads one [`RunConfig`] and writes its reports under
//! `<outdir>/<command>/`. Commands after `ingest` read the ingest store;
//! `state-model`, `predict` and `top-terms` also read the stance labels.

pub mod commands;
pub mod config;
pub mod report;
pub mod store;

use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use config::RunConfig;

/// Marks an error caused by data too thin to model (exit code 3).
#[derive(Debug)]
pub struct Degenerate(pub String);

impl fmt::Display for Degenerate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Degenerate {}

pub fn degenerate(msg: impl Into<String>) -> anyhow::Error {
    Degenerate(msg.into()).into()
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// 3 for degenerate data, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<Degenerate>()) {
        EXIT_DEGENERATE
    } else {
        EXIT_INPUT
    }
}

#[derive(Debug, Parser)]
#[command(name = "engage", version, about = "Stance detection and engagement models for issue-focused social media corpora")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "engage.toml")]
    pub config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted ground truth.
    Synth,
    /// Parse, aggregate, geolocate and filter accounts.
    Ingest,
    /// Partition the endorsement graph and label both sides.
    Stance,
    /// State-level feature selection and OLS ablation.
    StateModel,
    /// Attendance classifiers, feature-set ablation and top coefficients.
    Predict,
    /// Most over-represented terms of each side.
    TopTerms,
    /// Every step from ingest to top-terms, in order.
    Pipeline,
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(&cli.config, cli.seed)?;
    run_command(&cfg, cli.command)
}

pub fn run_command(cfg: &RunConfig, command: Command) -> Result<()> {
    match command {
        Command::Synth => commands::synth::cmd_synth(cfg).map(|s| log::info!("synth: {s:?}")),
        Command::Ingest => commands::ingest::cmd_ingest(cfg).map(|s| log::info!("ingest: {:?}", s.report)),
        Command::Stance => commands::stance::cmd_stance(cfg).map(|s| log::info!("stance: {s:?}")),
        Command::StateModel => commands::state_model::cmd_state_model(cfg).map(|s| log::info!("state-model: {s:?}")),
        Command::Predict => commands::predict::cmd_predict(cfg).map(|s| log::info!("predict: {s:?}")),
        Command::TopTerms => commands::top_terms::cmd_top_terms(cfg).map(|s| log::info!("top-terms: {s:?}")),
        Command::Pipeline => {
            for c in [
                Command::Ingest,
                Command::Stance,
                Command::StateModel,
                Command::Predict,
                Command::TopTerms,
            ] {
                run_command(cfg, c)?;
            }
            Ok(())
        }
    }
}
