use std::collections::BTreeMap;

use anyhow::{Context, Result};
use engage_core::ingest::{
    aggregate_users, apply_filters, parse_posts, parse_profiles, resolve_all, FilterReport, FilterRule, Gazetteer,
    VolumeCutoff,
};
use serde::Serialize;

use crate::config::{Input, RunConfig};
use crate::report::{create_dir, csv_writer, open, read_truth, write_json};
use crate::store::Store;

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub posts: usize,
    pub posts_skipped: usize,
    pub profiles: usize,
    pub profiles_skipped: usize,
    pub users: usize,
    pub report: FilterReport,
    pub volume_cutoff: Option<VolumeCutoff>,
    /// Only with a ground-truth file: whether the kept set equals the
    /// planted one, and per-rule counts expected from the generator.
    pub truth_kept_match: Option<bool>,
    pub truth_expected: Option<BTreeMap<FilterRule, usize>>,
}

/// parse -> aggregate -> resolve -> filter, then persist the kept users.
///
/// Writes `posts.jsonl` and `users.jsonl` (the store), `filter_report.json`
/// and `exclusions.csv` (`user_id,rule`).
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let posts_path = cfg.require(Input::Posts)?;
    let profiles_path = cfg.require(Input::Profiles)?;
    let gaz_path = cfg.require(Input::Gazetteer)?;
    let gaz = Gazetteer::from_csv(open(&gaz_path)?).with_context(|| format!("reading {}", gaz_path.display()))?;
    let posts = parse_posts(open(&posts_path)?).with_context(|| format!("reading {}", posts_path.display()))?;
    let profiles =
        parse_profiles(open(&profiles_path)?).with_context(|| format!("reading {}", profiles_path.display()))?;

    let mut users = aggregate_users(&posts.records, &profiles.records, &gaz);
    resolve_all(&mut users, &posts.records, &gaz);
    let outcome = apply_filters(&users, cfg.ingest.window_end);

    let dir = cfg.command_dir("ingest");
    create_dir(&dir)?;
    Store::from_filtered(&posts.records, &users, &outcome.kept).save(&dir)?;

    let mut w = csv_writer(&dir.join("exclusions.csv"))?;
    w.write_record(["user_id", "rule"])?;
    for (id, rule) in &outcome.excluded {
        w.write_record([id.as_str(), serde_json::to_value(rule)?.as_str().unwrap_or_default()])?;
    }
    w.flush()?;

    let (truth_kept_match, truth_expected) = match read_truth(cfg)? {
        Some(t) => {
            let planted: Vec<&str> = t.kept_ids();
            let kept: Vec<&str> = outcome.kept.iter().map(String::as_str).collect();
            let mut expected = BTreeMap::new();
            for u in &t.users {
                if let Some(r) = u.expected_rule {
                    *expected.entry(r).or_insert(0) += 1;
                }
            }
            (Some(planted == kept), Some(expected))
        }
        None => (None, None),
    };

    let summary = IngestSummary {
        posts: posts.records.len(),
        posts_skipped: posts.skipped,
        profiles: profiles.records.len(),
        profiles_skipped: profiles.skipped,
        users: users.len(),
        report: outcome.report,
        volume_cutoff: outcome.volume_cutoff,
        truth_kept_match,
        truth_expected,
    };
    write_json(&dir.join("filter_report.json"), &summary)?;
    Ok(summary)
}
