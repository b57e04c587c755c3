use std::collections::HashMap;

use anyhow::Result;
use engage_core::text::{log_odds_dirichlet, tokenize, top_terms};
use engage_core::Side;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{create_dir, csv_writer, load_stopwords, num, read_sides, write_json};
use crate::store::Store;
use crate::degenerate;

#[derive(Debug, Clone, Serialize)]
pub struct TopTermsSummary {
    pub tokens_control: u64,
    pub tokens_rights: u64,
    pub vocabulary: usize,
    pub top_control: Vec<String>,
    pub top_rights: Vec<String>,
}

/// Compares the original posts of the two sides with the Dirichlet-prior
/// log-odds ratio (background = both sides pooled) and ranks each side's
/// most over-represented tokens by z-score.
///
/// Writes `log_odds.csv` (every token), `top_terms.csv` and
/// `top_terms_report.json`.
pub fn cmd_top_terms(cfg: &RunConfig) -> Result<TopTermsSummary> {
    let stopwords = load_stopwords(cfg)?;
    let store = Store::load(&cfg.command_dir("ingest"))?;
    let sides = read_sides(cfg)?;
    let t = &cfg.top_terms;

    let mut counts: [HashMap<String, u64>; 2] = Default::default();
    for p in store.posts.iter().filter(|p| !p.is_retweet()) {
        let slot = match sides.get(&p.user_id) {
            Some(Side::Rights) => 0,
            Some(Side::Control) => 1,
            _ => continue,
        };
        for tok in tokenize(&p.text, &stopwords) {
            *counts[slot].entry(tok).or_insert(0) += 1;
        }
    }
    let mut background = counts[0].clone();
    for (k, v) in &counts[1] {
        *background.entry(k.clone()).or_insert(0) += v;
    }
    let [rights, control] = &counts;
    if rights.is_empty() || control.is_empty() {
        return Err(degenerate("both sides need at least one token of original text"));
    }
    let res = log_odds_dirichlet(rights, control, &background, t.prior_scale)?;

    let dir = cfg.command_dir("top-terms");
    create_dir(&dir)?;
    let mut w = csv_writer(&dir.join("log_odds.csv"))?;
    w.write_record(["token", "count_rights", "count_control", "delta", "variance", "z"])?;
    for e in &res.entries {
        w.write_record([
            e.token.clone(),
            e.count_i.to_string(),
            e.count_j.to_string(),
            num(e.delta),
            num(e.variance),
            num(e.z),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("top_terms.csv"))?;
    w.write_record(["side", "rank", "token", "z", "delta", "count_rights", "count_control"])?;
    let mut lists = Vec::new();
    for (side, toward_rights) in [(Side::Rights, true), (Side::Control, false)] {
        let top = top_terms(&res, toward_rights, t.min_count, t.min_z, t.limit);
        for (rank, e) in top.iter().enumerate() {
            w.write_record([
                side.as_str().to_string(),
                (rank + 1).to_string(),
                e.token.clone(),
                num(e.z),
                num(e.delta),
                e.count_i.to_string(),
                e.count_j.to_string(),
            ])?;
        }
        lists.push(top.iter().map(|e| e.token.clone()).collect::<Vec<_>>());
    }
    w.flush()?;

    let top_control = lists.pop().unwrap_or_default();
    let top_rights = lists.pop().unwrap_or_default();
    let summary = TopTermsSummary {
        tokens_control: control.values().sum(),
        tokens_rights: rights.values().sum(),
        vocabulary: res.entries.len(),
        top_control,
        top_rights,
    };
    write_json(&dir.join("top_terms_report.json"), &summary)?;
    Ok(summary)
}
