use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use anyhow::Result;
use engage_core::graph::giant_component;
use engage_core::partition::{label_sides, louvain, modularity, optimize_balance, PartitionError};
use engage_core::text::{classify_nb, nb_cross_validate, train_nb, NbCvReport, TokenDoc};
use engage_core::Side;
use serde::Serialize;

use crate::config::{Input, RunConfig};
use crate::report::{create_dir, csv_writer, load_stopwords, num, read_anchors, read_truth, write_json, SIDES_FILE};
use crate::degenerate;
use crate::store::Store;

#[derive(Debug, Clone, Serialize)]
pub struct StanceSummary {
    pub graph_nodes: usize,
    pub graph_edges: usize,
    pub gcc_nodes: usize,
    pub best_ratio: f64,
    pub candidates: Vec<(f64, usize)>,
    pub extreme_nodes: usize,
    pub gcc_control: usize,
    pub gcc_rights: usize,
    pub gcc_unknown: usize,
    pub bisection_modularity: f64,
    pub louvain_modularity: f64,
    pub louvain_communities: usize,
    pub nb_cv: Option<NbCvReport>,
    /// Kept users outside the giant component and how the classifier
    /// labeled them.
    pub off_gcc_users: usize,
    pub off_gcc_labeled: usize,
    /// Share of giant-component users whose label equals the planted side
    /// (ground truth runs only).
    pub planted_accuracy_gcc: Option<f64>,
    pub planted_accuracy_off_gcc: Option<f64>,
}

/// Partitions the giant component of the endorsement graph, names the poles
/// with the anchor accounts and labels the remaining users with Naive Bayes.
///
/// Writes `balance.csv`, `polarity.csv` (giant component), `sides.csv`
/// (every kept user), `modularity.csv` and `stance_report.json`.
pub fn cmd_stance(cfg: &RunConfig) -> Result<StanceSummary> {
    let anchors = read_anchors(&cfg.require(Input::Anchors)?)?;
    let stopwords = load_stopwords(cfg)?;
    let store = Store::load(&cfg.command_dir("ingest"))?;
    let p = &cfg.stance;

    let g = store.graph(p.min_edge_weight);
    let gcc = giant_component(&g);
    if gcc.len() < 2 {
        return Err(degenerate(format!(
            "the endorsement graph's giant component has {} nodes; at least 2 are needed",
            gcc.len()
        )));
    }
    let sub = g.induced_subgraph(&gcc);
    let search = optimize_balance(&sub, &p.balance_candidates, p.runs, cfg.seed).map_err(partition_error)?;
    let labels = label_sides(&search.scores, &anchors).map_err(partition_error)?;

    let groups: Vec<usize> = labels.polarity.iter().map(|&x| (x >= 0.5) as usize).collect();
    let bisection_q = modularity(&sub, &groups)?;
    let lv = louvain(&sub, cfg.seed)?;

    let docs: BTreeMap<String, TokenDoc> = store
        .original_texts()
        .into_iter()
        .map(|(id, texts)| (id.to_string(), TokenDoc::from_texts(id, texts, &stopwords)))
        .collect();
    let train: BTreeMap<String, Side> = labels
        .ids
        .iter()
        .zip(&labels.labels)
        .filter(|(_, s)| **s != Side::Unknown)
        .map(|(id, s)| (id.clone(), *s))
        .collect();
    let nb_cv = match nb_cross_validate(&docs, &train, p.nb_folds, p.nb_alpha, p.nb_threshold, cfg.seed) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("classifier cross-validation skipped: {e}");
            None
        }
    };
    let model = train_nb(&docs, &train, p.nb_alpha, cfg.seed)
        .map_err(|e| degenerate(format!("cannot train the stance classifier: {e}")))?;

    let dir = cfg.command_dir("stance");
    create_dir(&dir)?;

    let mut w = csv_writer(&dir.join("balance.csv"))?;
    w.write_record(["ratio", "extreme_nodes", "selected"])?;
    for (r, c) in &search.candidates {
        w.write_record([num(*r), c.to_string(), (*r == search.best_ratio).to_string()])?;
    }
    w.flush()?;

    labels.write_csv(BufWriter::new(File::create(dir.join("polarity.csv"))?))?;

    let mut w = csv_writer(&dir.join(SIDES_FILE))?;
    w.write_record(["user_id", "side", "source", "polarity", "p_rights"])?;
    let mut off_gcc_users = 0;
    let mut off_gcc_labeled = 0;
    let mut off_gcc_sides = BTreeMap::new();
    for id in store.users.keys() {
        if let Ok(i) = labels.ids.binary_search(id) {
            w.write_record([id.as_str(), labels.labels[i].as_str(), "partition", &num(labels.polarity[i]), ""])?;
        } else {
            let c = classify_nb(&model, &docs[id], p.nb_threshold)?;
            off_gcc_users += 1;
            if c.side != Side::Unknown {
                off_gcc_labeled += 1;
            }
            off_gcc_sides.insert(id.clone(), c.side);
            w.write_record([id.as_str(), c.side.as_str(), "classifier", "", &num(c.p_rights)])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("modularity.csv"))?;
    w.write_record(["method", "communities", "modularity"])?;
    w.write_record(["bisection".to_string(), "2".to_string(), num(bisection_q)])?;
    w.write_record(["louvain".to_string(), lv.communities.to_string(), num(lv.modularity)])?;
    w.flush()?;

    let (planted_accuracy_gcc, planted_accuracy_off_gcc) = match read_truth(cfg)? {
        Some(t) => {
            let planted = t.planted_sides();
            let acc = |pairs: Vec<(&String, Side)>| {
                let scored: Vec<bool> = pairs
                    .into_iter()
                    .filter(|(_, s)| *s != Side::Unknown)
                    .filter_map(|(id, s)| planted.get(id).map(|ps| *ps == s))
                    .collect();
                (!scored.is_empty()).then(|| scored.iter().filter(|&&b| b).count() as f64 / scored.len() as f64)
            };
            (
                acc(labels.ids.iter().zip(labels.labels.iter().copied()).collect()),
                acc(off_gcc_sides.iter().map(|(k, v)| (k, *v)).collect()),
            )
        }
        None => (None, None),
    };

    let summary = StanceSummary {
        graph_nodes: g.node_count(),
        graph_edges: g.edge_count(),
        gcc_nodes: gcc.len(),
        best_ratio: search.best_ratio,
        candidates: search.candidates.clone(),
        extreme_nodes: search.scores.extreme_count(),
        gcc_control: labels.count(Side::Control),
        gcc_rights: labels.count(Side::Rights),
        gcc_unknown: labels.count(Side::Unknown),
        bisection_modularity: bisection_q,
        louvain_modularity: lv.modularity,
        louvain_communities: lv.communities,
        nb_cv,
        off_gcc_users,
        off_gcc_labeled,
        planted_accuracy_gcc,
        planted_accuracy_off_gcc,
    };
    write_json(&dir.join("stance_report.json"), &summary)?;
    Ok(summary)
}

/// Anchors absent from the graph mean the data cannot be labeled; other
/// partition failures are reported as they are.
fn partition_error(e: PartitionError) -> anyhow::Error {
    match e {
        PartitionError::NoAnchors | PartitionError::TooSmall(_) | PartitionError::EmptyGraph => {
            degenerate(e.to_string())
        }
        other => anyhow::Error::new(other).context("partitioning the endorsement graph"),
    }
}

