use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use anyhow::{bail, Context, Result};
use engage_core::features::{
    join_external, standardize_and_transform, state_content_behavior_features, state_network_features, ExternalTable,
    FeatureMatrix, Provenance, Window,
};
use engage_core::ingest::StateCode;
use engage_core::stats::{ablation, correlation_matrix, ols, select_by_correlation, vif_prune, AblationMode, OlsRow};
use serde::Serialize;

use crate::config::{Input, RunConfig};
use crate::report::{
    create_dir, csv_writer, load_external_tables, load_resources, num, open, pval, read_sides, read_truth, stars, write_json,
};
use crate::store::Store;
use crate::degenerate;

/// Ablation groups of the state model, in report order.
const GROUPS: [(&str, &[Provenance]); 5] = [
    ("economic", &[Provenance::Economic]),
    ("demographic", &[Provenance::Demographic]),
    ("politics", &[Provenance::Politics]),
    ("health", &[Provenance::Health]),
    (
        "twitter",
        &[Provenance::Network, Provenance::Content, Provenance::Behavior, Provenance::Liwc],
    ),
];

#[derive(Debug, Clone, Serialize)]
pub struct StateModelSummary {
    pub states: usize,
    pub assembled_columns: usize,
    pub after_missing: usize,
    pub after_correlation: usize,
    pub selected: Vec<String>,
    pub full: OlsRow,
    pub planted_r2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct SelectionEntry {
    column: String,
    provenance: Provenance,
    stage: &'static str,
    detail: String,
}

/// Assembles the per-state table (graph, content and behavior features plus
/// the external tables), screens it (complete columns, |r| with the law
/// rating, VIF) and fits the OLS model with its group ablation.
///
/// Writes `features.csv` (+ `features_provenance.json`), `selection.csv`,
/// `coefficients.csv`, `ablation.csv`, `correlation.csv` and
/// `state_model_report.json`.
pub fn cmd_state_model(cfg: &RunConfig) -> Result<StateModelSummary> {
    let tables = load_external_tables(cfg)?;
    let ratings_path = cfg.require(Input::LawRatings)?;
    let ratings = read_ratings(&ratings_path)?;
    let res = load_resources(cfg)?;
    let store = Store::load(&cfg.command_dir("ingest"))?;
    let sides = read_sides(cfg)?;

    let states: Vec<StateCode> = StateCode::all().collect();
    let g = store.graph(cfg.stance.min_edge_weight);
    let state_of: BTreeMap<String, StateCode> = store
        .users
        .values()
        .filter_map(|u| u.resolved_state.map(|s| (u.user_id.clone(), s)))
        .collect();
    let window = Window {
        start: cfg.ingest.window_start,
        end: cfg.ingest.window_end,
    };
    let net = state_network_features(&g, &state_of, &sides, &states)?;
    let cb = state_content_behavior_features(&store.users, &store.ids(), &store.posts, &res, window, &states)?;
    let mut m = net.hstack(&cb)?;
    let identity: BTreeMap<String, String> = m.keys().iter().map(|k| (k.clone(), k.clone())).collect();
    for t in &tables {
        m = join_external(&m, t, &identity)?;
    }
    let rated: Vec<bool> = m.keys().iter().map(|k| ratings.contains_key(k)).collect();
    let unrated = rated.iter().filter(|r| !**r).count();
    if unrated > 0 {
        log::warn!("{unrated} states have no law rating and are left out");
    }
    let m = m.filter_rows(|i| rated[i]);
    let y: Vec<f64> = m.keys().iter().map(|k| ratings[k]).collect();

    let dir = cfg.command_dir("state-model");
    create_dir(&dir)?;
    m.write_csv(BufWriter::new(File::create(dir.join("features.csv"))?), "state")?;
    m.write_provenance_json(BufWriter::new(File::create(dir.join("features_provenance.json"))?))?;

    let mut log = Vec::new();
    let prov_of: BTreeMap<String, Provenance> = m.columns().iter().map(|c| (c.name.clone(), c.provenance)).collect();
    let mut entry = |column: &str, stage: &'static str, detail: String| {
        log.push(SelectionEntry {
            column: column.to_string(),
            provenance: prov_of[column],
            stage,
            detail,
        })
    };

    let incomplete: Vec<&str> = m
        .columns()
        .iter()
        .filter(|c| c.missing_count() > 0)
        .map(|c| c.name.as_str())
        .collect();
    for c in &incomplete {
        let missing = m.column(c).map(|c| c.missing_count()).unwrap_or(0);
        entry(c, "missing", format!("missing for {missing} of {} states", m.n_rows()));
    }
    let complete = m.drop_columns(&incomplete);
    let after_missing = complete.n_cols();
    let (std, _) = standardize_and_transform(&complete);

    let sel = select_by_correlation(&std, &y, cfg.state_model.min_abs_r)?;
    for (c, reason) in &sel.dropped {
        entry(c, "correlation", reason.clone());
    }
    let screened: Vec<String> = sel.kept.iter().map(|(c, _)| c.clone()).collect();
    if screened.len() < 2 {
        return Err(degenerate(format!(
            "{} columns pass the |r| >= {} screen; at least 2 are needed",
            screened.len(),
            cfg.state_model.min_abs_r
        )));
    }
    let names: Vec<&str> = screened.iter().map(String::as_str).collect();
    let cols = std.select(&names)?.dense_columns()?;
    let vif = vif_prune(&cols, &screened, cfg.state_model.max_vif)?;
    for (c, v) in &vif.removed {
        entry(c, "vif", format!("VIF = {v:.4} >= {}", cfg.state_model.max_vif));
    }
    let r_of: BTreeMap<&str, f64> = sel.kept.iter().map(|(c, r)| (c.as_str(), *r)).collect();
    for (c, v) in &vif.kept {
        entry(c, "kept", format!("r = {:.4}, VIF = {v:.4}", r_of[c.as_str()]));
    }
    let selected: Vec<String> = vif.kept.iter().map(|(c, _)| c.clone()).collect();
    if selected.len() < 2 {
        return Err(degenerate(format!(
            "{} columns survive the VIF screen; at least 2 are needed",
            selected.len()
        )));
    }

    let mut w = csv_writer(&dir.join("selection.csv"))?;
    w.write_record(["column", "provenance", "stage", "detail"])?;
    for e in &log {
        w.write_record([e.column.as_str(), e.provenance.as_str(), e.stage, &e.detail])?;
    }
    w.flush()?;

    let names: Vec<&str> = selected.iter().map(String::as_str).collect();
    let x = std.select(&names)?;
    let fit = ols(&x.dense_rows()?, &y, &selected).map_err(|e| degenerate(format!("OLS on the selected columns: {e}")))?;

    let mut w = csv_writer(&dir.join("coefficients.csv"))?;
    w.write_record(["term", "provenance", "estimate", "std_error", "t"])?;
    w.write_record([
        "(intercept)".to_string(),
        String::new(),
        num(fit.intercept),
        num(fit.std_errors[0]),
        num(fit.intercept / fit.std_errors[0]),
    ])?;
    for (j, name) in selected.iter().enumerate() {
        let (b, se) = (fit.coefficients[j], fit.std_errors[j + 1]);
        w.write_record([name.clone(), prov_of[name].as_str().to_string(), num(b), num(se), num(b / se)])?;
    }
    w.flush()?;

    let groups: Vec<(String, Vec<String>)> = GROUPS
        .iter()
        .map(|(name, provs)| {
            let cols = x
                .columns()
                .iter()
                .filter(|c| provs.contains(&c.provenance))
                .map(|c| c.name.clone())
                .collect();
            (name.to_string(), cols)
        })
        .filter(|(_, cols): &(String, Vec<String>)| !cols.is_empty())
        .collect();
    let report = ablation(&groups, &[], &AblationMode::Ols { y: &y }, &x)?;
    let row = |label: &str| report.rows.iter().find(|r| r.label == label);
    let mut w = csv_writer(&dir.join("ablation.csv"))?;
    w.write_record([
        "group",
        "columns",
        "only_r2",
        "only_f_pvalue",
        "only_sig",
        "excluded_r2",
        "excluded_f_pvalue",
        "excluded_sig",
    ])?;
    let cells = |r: Option<&engage_core::stats::AblationRow>| match r.and_then(|r| r.ols.as_ref()) {
        Some(o) => [num(o.r2), pval(o.f_pvalue), stars(o.f_pvalue).to_string()],
        None => Default::default(),
    };
    let full = row("full");
    let [a, b, c] = cells(full);
    w.write_record(["full".to_string(), selected.len().to_string(), a.clone(), b.clone(), c.clone(), a, b, c])?;
    for (name, cols) in &groups {
        let [a, b, c] = cells(row(&format!("{name} only")));
        let [d, e, f] = cells(row(&format!("without {name}")));
        w.write_record([name.clone(), cols.len().to_string(), a, b, c, d, e, f])?;
    }
    w.flush()?;
    write_json(&dir.join("ablation.json"), &report)?;

    let mut with_target = x.clone();
    with_target.push_column("law_rating", Provenance::Politics, y.iter().map(|v| Some(*v)).collect())?;
    write_correlation(&dir.join("correlation.csv"), &with_target)?;

    let planted_r2 = read_truth(cfg)?.and_then(|t| t.planted_r2);
    let full = full
        .and_then(|r| r.ols.clone())
        .context("the full model row of the ablation could not be fitted")?;
    let summary = StateModelSummary {
        states: m.n_rows(),
        assembled_columns: m.n_cols(),
        after_missing,
        after_correlation: screened.len(),
        selected,
        full,
        planted_r2,
    };
    write_json(&dir.join("state_model_report.json"), &summary)?;
    Ok(summary)
}

/// `state,rating` (the rating column may also be the first non-key one).
fn read_ratings(path: &std::path::Path) -> Result<BTreeMap<String, f64>> {
    let t = ExternalTable::from_csv(open(path)?, Provenance::Politics)
        .with_context(|| format!("reading {}", path.display()))?;
    let j = t.columns.iter().position(|c| c == "rating").unwrap_or(0);
    if t.columns.is_empty() {
        bail!("{} has no rating column", path.display());
    }
    let mut out = BTreeMap::new();
    for (k, row) in t.keys.iter().zip(&t.rows) {
        let key: StateCode = k.parse().with_context(|| format!("{}: bad state key", path.display()))?;
        if let Some(v) = row[j] {
            out.insert(key.to_string(), v);
        }
    }
    Ok(out)
}

fn write_correlation(path: &std::path::Path, m: &FeatureMatrix) -> Result<()> {
    let r = correlation_matrix(m)?;
    let names: Vec<&str> = m.names().collect();
    let mut w = csv_writer(path)?;
    let mut header = vec![String::from("variable")];
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.to_string()];
        rec.extend(r[i].iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
