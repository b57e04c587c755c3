use anyhow::{Context, Result};
use engage_core::synth::{generate, write_dataset, SynthConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::create_dir;

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub users: usize,
    pub network_users: usize,
    pub edges: usize,
    pub posts: usize,
    pub expected_kept: usize,
    pub attendees: usize,
}

#[derive(Serialize)]
struct Echo<'a> {
    seed: u64,
    synth: &'a SynthConfig,
}

/// Generates the dataset into `<outdir>/synth/` together with the effective
/// generator settings (`synth_config.toml`).
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    let ds = generate(&cfg.synth, cfg.seed).context("generating synthetic data")?;
    let dir = cfg.command_dir("synth");
    create_dir(&dir)?;
    write_dataset(&dir, &ds).context("writing synthetic data")?;
    let echo = toml::to_string(&Echo {
        seed: cfg.seed,
        synth: &cfg.synth,
    })?;
    std::fs::write(dir.join("synth_config.toml"), echo)?;
    let kept = ds.truth.kept_ids();
    Ok(SynthSummary {
        users: ds.truth.users.len(),
        network_users: ds.graph.node_count(),
        edges: ds.graph.edge_count(),
        posts: ds.corpus.posts.len(),
        expected_kept: kept.len(),
        attendees: ds
            .truth
            .users
            .iter()
            .filter(|u| u.attended && u.expected_rule.is_none())
            .count(),
    })
}
