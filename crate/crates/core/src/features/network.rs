use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, Provenance};
use crate::graph::{EndorsementGraph, NodeSet, UndirectedGraph};
use crate::ingest::StateCode;
use crate::partition::Side;

/// Gini coefficient `sum_ij |x_i - x_j| / (2 n^2 mean)`, evaluated in
/// O(n log n) through the sorted form. Empty or all-zero input gives 0.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let weighted: f64 = v
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * x)
        .sum();
    weighted / (n as f64 * total)
}

/// Local clustering of `u` on the symmetrized, unweighted graph.
pub fn local_clustering(ug: &UndirectedGraph, u: usize, mark: &mut [bool]) -> f64 {
    let k = ug.degree(u);
    if k < 2 {
        return 0.0;
    }
    for (v, _) in ug.neighbors(u) {
        mark[v] = true;
    }
    let mut links = 0usize;
    for (v, _) in ug.neighbors(u) {
        links += ug.neighbors(v).filter(|&(w, _)| mark[w]).count();
    }
    for (v, _) in ug.neighbors(u) {
        mark[v] = false;
    }
    // Each triangle edge among neighbors was seen from both ends.
    links as f64 / (k * (k - 1)) as f64
}

fn clustering_all(g: &EndorsementGraph) -> Vec<f64> {
    let ug = UndirectedGraph::from_directed(g);
    let mut mark = vec![false; g.node_count()];
    (0..g.node_count()).map(|u| local_clustering(&ug, u, &mut mark)).collect()
}

/// Mean local clustering over all nodes; `None` for fewer than 2 nodes.
pub fn average_clustering(g: &EndorsementGraph) -> Option<f64> {
    let n = g.node_count();
    (n >= 2).then(|| clustering_all(g).iter().sum::<f64>() / n as f64)
}

fn pearson_pairs(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Degree assortativity: Pearson correlation of total (in + out) degree
/// across both orientations of every symmetrized edge. `None` with fewer
/// than 2 symmetrized edges or when all endpoint degrees are equal.
pub fn assortativity(g: &EndorsementGraph) -> Option<f64> {
    let ug = UndirectedGraph::from_directed(g);
    let deg: Vec<f64> = (0..g.node_count())
        .map(|u| (g.in_degree(u) + g.out_degree(u)) as f64)
        .collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for u in 0..ug.node_count() {
        for (v, _) in ug.neighbors(u) {
            xs.push(deg[u]);
            ys.push(deg[v]);
        }
    }
    if xs.len() < 4 {
        return None;
    }
    pearson_pairs(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Teleport weights per node id; uniform when `None`. Nodes not listed
    /// get zero teleport mass.
    pub teleport: Option<BTreeMap<String, f64>>,
}

impl Default for PageRankOptions {
    fn default() -> Self {
        PageRankOptions {
            damping: 0.85,
            tolerance: 1e-10,
            max_iter: 1000,
            teleport: None,
        }
    }
}

/// Weighted PageRank by power iteration. Rank flows along out-edges in
/// proportion to edge weight; dangling nodes hand their rank to the
/// teleport distribution. Stops when the L1 change drops below the
/// tolerance.
pub fn pagerank(g: &EndorsementGraph, opts: &PageRankOptions) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let mut tele: Vec<f64> = match &opts.teleport {
        None => vec![1.0 / n as f64; n],
        Some(m) => g.ids().iter().map(|id| m.get(id).copied().unwrap_or(0.0).max(0.0)).collect(),
    };
    let tsum: f64 = tele.iter().sum();
    if tsum > 0.0 {
        tele.iter_mut().for_each(|t| *t /= tsum);
    } else {
        tele = vec![1.0 / n as f64; n];
    }
    let out_w: Vec<f64> = (0..n).map(|u| g.out_edges(u).iter().map(|e| e.1 as f64).sum()).collect();
    let d = opts.damping;
    let mut rank = tele.clone();
    for _ in 0..opts.max_iter {
        let dangling: f64 = (0..n).filter(|&u| out_w[u] == 0.0).map(|u| rank[u]).sum();
        let mut next: Vec<f64> = tele.iter().map(|t| (1.0 - d + d * dangling) * t).collect();
        for u in 0..n {
            if out_w[u] > 0.0 {
                let share = d * rank[u] / out_w[u];
                for &(v, w) in g.out_edges(u) {
                    next[v] += share * w as f64;
                }
            }
        }
        let delta: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if delta < opts.tolerance {
            break;
        }
    }
    rank
}

/// Table-2 style network features of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNetworkFeatures {
    pub in_gcc: bool,
    pub in_degree: usize,
    pub out_degree: usize,
    pub max_in_weight: u64,
    pub max_out_weight: u64,
    pub pagerank: f64,
    pub clustering: f64,
    pub avg_in_neighbor_in_degree: Option<f64>,
    pub avg_out_neighbor_in_degree: Option<f64>,
}

impl UserNetworkFeatures {
    fn absent() -> Self {
        UserNetworkFeatures {
            in_gcc: false,
            in_degree: 0,
            out_degree: 0,
            max_in_weight: 0,
            max_out_weight: 0,
            pagerank: 0.0,
            clustering: 0.0,
            avg_in_neighbor_in_degree: None,
            avg_out_neighbor_in_degree: None,
        }
    }

    /// `(column, value)` pairs under the `net_` naming.
    pub fn columns(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("net_inGCC", Some(self.in_gcc as u8 as f64)),
            ("net_indegree", Some(self.in_degree as f64)),
            ("net_outdegree", Some(self.out_degree as f64)),
            ("net_maxinweight", Some(self.max_in_weight as f64)),
            ("net_maxoutweight", Some(self.max_out_weight as f64)),
            ("net_pagerank", Some(self.pagerank)),
            ("net_clustering", Some(self.clustering)),
            ("net_avginneigh_indegree", self.avg_in_neighbor_in_degree),
            ("net_avgoutneigh_indegree", self.avg_out_neighbor_in_degree),
        ]
    }
}

/// Network features for each requested user. Users absent from `g` get
/// zeros, `in_gcc = false` and missing neighborhood averages.
pub fn user_network_features(
    g: &EndorsementGraph,
    gcc: &NodeSet,
    users: &[String],
    opts: &PageRankOptions,
) -> BTreeMap<String, UserNetworkFeatures> {
    let pr = pagerank(g, opts);
    let cc = clustering_all(g);
    let avg_in_deg = |edges: &[(usize, u64)]| {
        (!edges.is_empty()).then(|| edges.iter().map(|&(v, _)| g.in_degree(v) as f64).sum::<f64>() / edges.len() as f64)
    };
    users
        .iter()
        .map(|u| {
            let f = match g.index_of(u) {
                None => UserNetworkFeatures::absent(),
                Some(i) => UserNetworkFeatures {
                    in_gcc: gcc.contains(u),
                    in_degree: g.in_degree(i),
                    out_degree: g.out_degree(i),
                    max_in_weight: g.in_edges(i).iter().map(|e| e.1).max().unwrap_or(0),
                    max_out_weight: g.out_edges(i).iter().map(|e| e.1).max().unwrap_or(0),
                    pagerank: pr[i],
                    clustering: cc[i],
                    avg_in_neighbor_in_degree: avg_in_deg(g.in_edges(i)),
                    avg_out_neighbor_in_degree: avg_in_deg(g.out_edges(i)),
                },
            };
            (u.clone(), f)
        })
        .collect()
}

fn subgraph_metrics(prefix: &str, sub: &EndorsementGraph, out: &mut Vec<(String, Option<f64>)>) {
    let n = sub.node_count();
    let pairs = n >= 2;
    let indeg: Vec<f64> = (0..n).map(|u| sub.in_degree(u) as f64).collect();
    let name = |m: &str| format!("{prefix}_{m}");
    out.push((name("nodes"), Some(n as f64)));
    out.push((name("edges"), Some(sub.edge_count() as f64)));
    out.push((name("clustering"), average_clustering(sub)));
    out.push((
        name("density"),
        pairs.then(|| sub.edge_count() as f64 / (n * (n - 1)) as f64),
    ));
    out.push((name("maxweight"), sub.edges().map(|e| e.2).max().map(|w| w as f64)));
    out.push((name("assortativity"), assortativity(sub)));
    out.push((name("gini_indegree"), pairs.then(|| gini(&indeg))));
}

/// Side share of rights among decided users.
fn rights_share(sides: impl Iterator<Item = Side>) -> Option<f64> {
    let (mut r, mut d) = (0usize, 0usize);
    for s in sides {
        match s {
            Side::Rights => {
                r += 1;
                d += 1
            }
            Side::Control => d += 1,
            Side::Unknown => {}
        }
    }
    (d > 0).then(|| r as f64 / d as f64)
}

/// One row per state in `states`. For the state's graph users (and for
/// each side's subset of them) the metrics are computed on the induced
/// subgraph (`net_*`) and on the out-edge-induced subgraph (`net_eig_*`).
/// `net_rights_prop` is the share of rights among the state's labeled
/// graph users and `net_node_prop_dev` its absolute gap to the share over
/// all labeled graph users.
pub fn state_network_features(
    g: &EndorsementGraph,
    state_of: &BTreeMap<String, StateCode>,
    sides: &BTreeMap<String, Side>,
    states: &[StateCode],
) -> Result<FeatureMatrix, FeatureError> {
    let side_of = |id: &str| sides.get(id).copied().unwrap_or(Side::Unknown);
    let global = rights_share(g.ids().iter().map(|id| side_of(id)));
    let rows: Vec<Vec<(String, Option<f64>)>> = states
        .par_iter()
        .map(|st| {
            let members: Vec<&String> = g.ids().iter().filter(|id| state_of.get(*id) == Some(st)).collect();
            let mut row = Vec::new();
            for (tag, filter) in [("", None), ("_ctl", Some(Side::Control)), ("_rts", Some(Side::Rights))] {
                let set: NodeSet = members
                    .iter()
                    .filter(|id| filter.is_none_or(|s| side_of(id) == s))
                    .map(|id| (*id).clone())
                    .collect();
                subgraph_metrics(&format!("net{tag}"), &g.induced_subgraph(&set), &mut row);
                subgraph_metrics(&format!("net_eig{tag}"), &g.out_edge_induced_subgraph(&set), &mut row);
            }
            let share = rights_share(members.iter().map(|id| side_of(id)));
            row.push(("net_rights_prop".into(), share));
            row.push((
                "net_node_prop_dev".into(),
                share.zip(global).map(|(s, g)| (s - g).abs()),
            ));
            row
        })
        .collect();
    let tagged: Vec<Vec<(String, Provenance, Option<f64>)>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(n, v)| (n, Provenance::Network, v)).collect())
        .collect();
    FeatureMatrix::from_rows(
        states
            .iter()
            .zip(&tagged)
            .map(|(s, r)| (s.to_string(), r.as_slice())),
    )
}
