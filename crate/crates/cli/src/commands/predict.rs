use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use engage_core::features::{
    join_external, missing_policy, standardize_and_transform, user_content_behavior_features, user_network_features,
    FeatureMatrix, PageRankOptions, Provenance, Window,
};
use engage_core::graph::giant_component;
use engage_core::stats::{
    ablation, kfold_cv, stratified_sample, train, AblationMode, AblationReport, ClassifierKind, ClassifierSpec,
    CvResult, StatsError,
};
use serde::Serialize;

use crate::config::{Input, RunConfig};
use crate::report::{create_dir, csv_writer, load_external_tables, load_resources, num, read_id_list, write_json};
use crate::store::Store;
use crate::degenerate;

/// Feature-set letters and the provenances they cover, in report order.
pub const GROUPS: [(char, &str, Provenance); 8] = [
    ('N', "network", Provenance::Network),
    ('P', "politics", Provenance::Politics),
    ('H', "health", Provenance::Health),
    ('S', "socio-economics", Provenance::Economic),
    ('D', "demographics", Provenance::Demographic),
    ('L', "liwc", Provenance::Liwc),
    ('B', "behavior", Provenance::Behavior),
    ('C', "content", Provenance::Content),
];

/// Validates a string of group letters such as `CBLD`.
pub fn parse_groups(s: &str) -> Result<Vec<char>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for ch in s.chars() {
        if !GROUPS.iter().any(|g| g.0 == ch) {
            bail!("unknown feature group {ch:?} in {s:?}; use letters from NPHSDLBC");
        }
        if !seen.insert(ch) {
            bail!("feature group {ch:?} repeated in {s:?}");
        }
        out.push(ch);
    }
    if out.is_empty() {
        bail!("empty feature group list");
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub attendees: usize,
    pub controls: usize,
    pub rows_modeled: usize,
    pub columns_modeled: usize,
    pub dropped_columns: Vec<String>,
    pub dropped_rows: usize,
    /// `(classifier, mean F1, sd F1)`.
    pub classifiers: Vec<(String, f64, f64)>,
    /// The group-only ablation row with the highest mean F1.
    pub best_single_group: Option<String>,
}

const CLASSIFIERS: [ClassifierKind; 3] = [ClassifierKind::LinearSvm, ClassifierKind::Logreg, ClassifierKind::RandomForest];

/// Builds the attendee + stratified control cohort, applies the missing-value
/// policy, standardizes, and evaluates the three classifiers and the
/// feature-set ablation under k-fold cross-validation.
///
/// Writes `cohort.csv`, `classifiers.csv`, `ablation.csv` (+ `.json`),
/// `coefficients.csv` and `predict_report.json`.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictSummary> {
    let p = &cfg.predict;
    let attendee_list = read_id_list(&cfg.require(Input::Attendees)?)?;
    let tables = load_external_tables(cfg)?;
    let res = load_resources(cfg)?;
    let store = Store::load(&cfg.command_dir("ingest"))?;

    let state_of = |id: &str| {
        store.users[id]
            .resolved_state
            .map(|s| s.to_string())
            .unwrap_or_default()
    };
    let attendees: Vec<String> = attendee_list.iter().filter(|id| store.users.contains_key(*id)).cloned().collect();
    let pool: Vec<(String, String)> = store
        .users
        .keys()
        .filter(|id| !attendee_list.contains(*id))
        .map(|id| (id.clone(), state_of(id)))
        .collect();
    let mut shares: BTreeMap<String, f64> = BTreeMap::new();
    for id in store.users.keys() {
        *shares.entry(state_of(id)).or_insert(0.0) += 1.0;
    }
    let control_size = p.control_size.unwrap_or(attendees.len());
    let controls = stratified_sample(&pool, &shares, control_size, cfg.seed).map_err(|e| match e {
        StatsError::TooFew { need, got } => {
            degenerate(format!("control cohort needs {need} users but only {got} are available"))
        }
        other => other.into(),
    })?;
    let cohort: BTreeSet<String> = attendees.iter().chain(&controls).cloned().collect();
    if cohort.len() < p.k || attendees.is_empty() || controls.is_empty() {
        return Err(degenerate(format!(
            "cohort of {} attendees and {} controls is too small for {}-fold cross-validation",
            attendees.len(),
            controls.len(),
            p.k
        )));
    }
    let cohort: Vec<String> = cohort.into_iter().collect();

    let m = assemble(cfg, &store, &cohort, &res, &tables)?;
    let (complete, missing) = missing_policy(&m, p.missing_threshold);
    let (x, _) = standardize_and_transform(&complete);
    let attended: BTreeSet<&str> = attendees.iter().map(String::as_str).collect();
    let y: Vec<bool> = x.keys().iter().map(|k| attended.contains(k.as_str())).collect();
    let positives = y.iter().filter(|b| **b).count();
    if x.n_rows() < p.k || positives == 0 || positives == y.len() || x.n_cols() == 0 {
        return Err(degenerate(format!(
            "{} complete rows ({positives} attendees) and {} columns remain after the missing-value policy",
            x.n_rows(),
            x.n_cols()
        )));
    }

    let dir = cfg.command_dir("predict");
    create_dir(&dir)?;
    let modeled: BTreeSet<&str> = x.keys().iter().map(String::as_str).collect();
    let mut w = csv_writer(&dir.join("cohort.csv"))?;
    w.write_record(["user_id", "attended", "state", "modeled"])?;
    for id in &cohort {
        w.write_record([
            id.clone(),
            attended.contains(id.as_str()).to_string(),
            state_of(id),
            modeled.contains(id.as_str()).to_string(),
        ])?;
    }
    w.flush()?;

    let rows = x.dense_rows()?;
    let mut w = csv_writer(&dir.join("classifiers.csv"))?;
    write_cv_header(&mut w, "model")?;
    let mut classifiers = Vec::new();
    for kind in CLASSIFIERS {
        let cv = kfold_cv(&ClassifierSpec::new(kind, cfg.seed), &rows, &y, p.k, cfg.seed)?;
        write_cv_row(&mut w, kind.as_str(), x.n_cols(), &cv)?;
        classifiers.push((kind.as_str().to_string(), cv.mean.f1, cv.sd.f1));
    }
    w.flush()?;

    let groups: Vec<(String, Vec<String>)> = GROUPS
        .iter()
        .map(|(letter, _, prov)| {
            let cols = x.columns().iter().filter(|c| c.provenance == *prov).map(|c| c.name.clone()).collect();
            (letter.to_string(), cols)
        })
        .collect();
    let steps: Vec<Vec<String>> = p
        .cumulative
        .iter()
        .map(|s| parse_groups(s).map(|g| g.iter().map(char::to_string).collect()))
        .collect::<Result<_>>()?;
    let spec = ClassifierSpec::new(ClassifierKind::Logreg, cfg.seed);
    let report = ablation(
        &groups,
        &steps,
        &AblationMode::Cv {
            spec: &spec,
            y: &y,
            k: p.k,
            seed: cfg.seed,
        },
        &x,
    )?;
    write_ablation(&dir, &report)?;
    let best_single_group = report
        .rows
        .iter()
        .filter(|r| r.kind == "only")
        .filter_map(|r| r.cv.as_ref().map(|cv| (r.label.clone(), cv.mean.f1)))
        .fold(None::<(String, f64)>, |best, (l, f)| match best {
            Some((bl, bf)) if bf >= f => Some((bl, bf)),
            _ => Some((l, f)),
        })
        .map(|(l, _)| l);

    write_coefficients(&dir, &x, &y, &parse_groups(&p.coefficient_groups)?, p.top_coefficients, cfg.seed)?;

    let summary = PredictSummary {
        attendees: attendees.len(),
        controls: controls.len(),
        rows_modeled: x.n_rows(),
        columns_modeled: x.n_cols(),
        dropped_columns: missing.dropped_columns,
        dropped_rows: missing.dropped_rows.len(),
        classifiers,
        best_single_group,
    };
    write_json(&dir.join("predict_report.json"), &summary)?;
    Ok(summary)
}

/// Per-user table: network features, content/behavior/category features,
/// then the external tables looked up by the user's resolved state.
fn assemble(
    cfg: &RunConfig,
    store: &Store,
    cohort: &[String],
    res: &engage_core::features::ContentResources,
    tables: &[engage_core::features::ExternalTable],
) -> Result<FeatureMatrix> {
    let g = store.graph(cfg.stance.min_edge_weight);
    let gcc = giant_component(&g);
    let net = user_network_features(&g, &gcc, cohort, &PageRankOptions::default());
    let window = Window {
        start: cfg.ingest.window_start,
        end: cfg.ingest.window_end,
    };
    let rows: Vec<(String, Vec<(String, Provenance, Option<f64>)>)> = cohort
        .iter()
        .map(|id| {
            let mut row: Vec<(String, Provenance, Option<f64>)> = net[id]
                .columns()
                .into_iter()
                .map(|(n, v)| (n.to_string(), Provenance::Network, v))
                .collect();
            row.extend(user_content_behavior_features(&store.users[id], &store.posts, res, window));
            (id.clone(), row)
        })
        .collect();
    let mut m = FeatureMatrix::from_rows(rows.iter().map(|(k, r)| (k.clone(), r.as_slice())))?;
    let key_map: BTreeMap<String, String> = cohort
        .iter()
        .map(|id| {
            let st = store.users[id].resolved_state.map(|s| s.to_string()).unwrap_or_default();
            (id.clone(), st)
        })
        .collect();
    for t in tables {
        m = join_external(&m, t, &key_map)?;
    }
    Ok(m)
}

fn write_cv_header<W: std::io::Write>(w: &mut csv::Writer<W>, first: &str) -> Result<()> {
    w.write_record([
        first,
        "columns",
        "accuracy",
        "accuracy_sd",
        "precision",
        "precision_sd",
        "recall",
        "recall_sd",
        "f1",
        "f1_sd",
    ])?;
    Ok(())
}

fn write_cv_row<W: std::io::Write>(w: &mut csv::Writer<W>, label: &str, columns: usize, cv: &CvResult) -> Result<()> {
    let (m, s) = (&cv.mean, &cv.sd);
    w.write_record([
        label.to_string(),
        columns.to_string(),
        num(m.accuracy),
        num(s.accuracy),
        num(m.precision),
        num(s.precision),
        num(m.recall),
        num(s.recall),
        num(m.f1),
        num(s.f1),
    ])?;
    Ok(())
}

fn write_ablation(dir: &std::path::Path, report: &AblationReport) -> Result<()> {
    let mut w = csv_writer(&dir.join("ablation.csv"))?;
    w.write_record([
        "feature_set",
        "kind",
        "columns",
        "accuracy",
        "accuracy_sd",
        "precision",
        "precision_sd",
        "recall",
        "recall_sd",
        "f1",
        "f1_sd",
        "error",
    ])?;
    for r in &report.rows {
        let mut rec = vec![r.label.clone(), r.kind.clone(), r.columns.len().to_string()];
        match &r.cv {
            Some(cv) => {
                let (m, s) = (&cv.mean, &cv.sd);
                for (a, b) in [
                    (m.accuracy, s.accuracy),
                    (m.precision, s.precision),
                    (m.recall, s.recall),
                    (m.f1, s.f1),
                ] {
                    rec.push(num(a));
                    rec.push(num(b));
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 8)),
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_json(&dir.join("ablation.json"), report)
}

/// Fits logistic regression on the chosen groups over the whole cohort and
/// lists the largest positive (attended) and negative coefficients.
fn write_coefficients(
    dir: &std::path::Path,
    x: &FeatureMatrix,
    y: &[bool],
    letters: &[char],
    top: usize,
    seed: u64,
) -> Result<()> {
    let provs: Vec<Provenance> = GROUPS.iter().filter(|g| letters.contains(&g.0)).map(|g| g.2).collect();
    let sub = x.select_provenance(&provs);
    let mut w = csv_writer(&dir.join("coefficients.csv"))?;
    w.write_record(["direction", "rank", "feature", "provenance", "coefficient"])?;
    if sub.n_cols() == 0 {
        log::warn!("no columns in feature groups {letters:?}; coefficient table left empty");
        w.flush()?;
        return Ok(());
    }
    let model = train(&ClassifierSpec::new(ClassifierKind::Logreg, seed), &sub.dense_rows()?, y)?;
    let lin = model.linear().expect("logistic regression is linear");
    let mut coefs: Vec<(&str, Provenance, f64)> = sub
        .columns()
        .iter()
        .zip(&lin.weights)
        .map(|(c, b)| (c.name.as_str(), c.provenance, *b))
        .collect();
    coefs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(b.0)));
    let positive = coefs.iter().filter(|c| c.2 > 0.0).take(top);
    let negative = coefs.iter().rev().filter(|c| c.2 < 0.0).take(top);
    for (dir_label, list) in [("attended", positive.collect::<Vec<_>>()), ("not_attended", negative.collect())] {
        for (rank, (name, prov, b)) in list.into_iter().enumerate() {
            w.write_record([dir_label, &(rank + 1).to_string(), name, prov.as_str(), &num(*b)])?;
        }
    }
    w.flush()?;
    Ok(())
}
