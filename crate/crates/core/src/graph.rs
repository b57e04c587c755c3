//! Weighted directed endorsement (retweet) graph.
//!
//! An edge `a -> b` with weight `w` means `a` retweeted `b` exactly `w`
//! times, so in-degree measures how often a user is endorsed. Nodes are
//! kept sorted by user id, which fixes every index-based iteration order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Post;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("edge {0} -> {1} has weight {2} below the minimum {3}")]
    LightEdge(String, String, u64, u64),
    #[error("edge list CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A set of user ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSet(pub BTreeSet<String>);

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.contains(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }
}

impl<S: Into<String>> FromIterator<S> for NodeSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        NodeSet(iter.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EdgeRow {
    source: String,
    target: String,
    weight: u64,
}

/// Accumulates retweet counts before thresholding.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: BTreeSet<String>,
    counts: BTreeMap<(String, String), u64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` endorsements from `source` to `target`. Self-loops are
    /// ignored.
    pub fn add(&mut self, source: &str, target: &str, weight: u64) {
        if source == target || weight == 0 {
            return;
        }
        *self.counts.entry((source.to_string(), target.to_string())).or_insert(0) += weight;
    }

    pub fn add_node(&mut self, id: &str) {
        self.nodes.insert(id.to_string());
    }

    /// Drops edges lighter than `min_weight`; the node set becomes the
    /// surviving endpoints plus explicitly added nodes.
    pub fn finish(self, min_weight: u64) -> EndorsementGraph {
        let min_weight = min_weight.max(1);
        let edges: Vec<((String, String), u64)> =
            self.counts.into_iter().filter(|(_, w)| *w >= min_weight).collect();
        let mut ids = self.nodes;
        for ((s, t), _) in &edges {
            ids.insert(s.clone());
            ids.insert(t.clone());
        }
        let ids: Vec<String> = ids.into_iter().collect();
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut out = vec![Vec::new(); ids.len()];
        let mut inc = vec![Vec::new(); ids.len()];
        for ((s, t), w) in edges {
            let (si, ti) = (index[&s], index[&t]);
            out[si].push((ti, w));
            inc[ti].push((si, w));
        }
        for adj in out.iter_mut().chain(inc.iter_mut()) {
            adj.sort_unstable();
        }
        EndorsementGraph {
            ids,
            index,
            out,
            inc,
            min_weight,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EndorsementGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<Vec<(usize, u64)>>,
    inc: Vec<Vec<(usize, u64)>>,
    min_weight: u64,
}

impl PartialEq for EndorsementGraph {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.out == other.out
    }
}

/// Counts retweets between kept users, drops self-retweets and edges
/// lighter than `min_weight`.
pub fn build_endorsement_graph(posts: &[Post], kept: &BTreeSet<String>, min_weight: u64) -> EndorsementGraph {
    let mut b = GraphBuilder::new();
    for p in posts {
        if let Some(rt) = &p.retweeted_user_id {
            if kept.contains(&p.user_id) && kept.contains(rt) {
                b.add(&p.user_id, rt, 1);
            }
        }
    }
    b.finish(min_weight)
}

impl EndorsementGraph {
    pub fn empty() -> Self {
        GraphBuilder::new().finish(1)
    }

    /// Builds a graph from explicit nodes and weighted edges, validating the
    /// invariants instead of silently dropping offenders.
    pub fn from_edges<'a>(
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str, u64)>,
        min_weight: u64,
    ) -> Result<Self, GraphError> {
        let mut b = GraphBuilder::new();
        for n in nodes {
            b.add_node(n);
        }
        for (s, t, w) in edges {
            if s == t {
                return Err(GraphError::SelfLoop(s.to_string()));
            }
            if w < min_weight.max(1) {
                return Err(GraphError::LightEdge(s.into(), t.into(), w, min_weight));
            }
            b.add(s, t, w);
        }
        Ok(b.finish(min_weight))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn min_weight(&self) -> u64 {
        self.min_weight
    }

    /// Node ids in index order (sorted).
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// `(target, weight)` pairs sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, u64)] {
        &self.out[i]
    }

    /// `(source, weight)` pairs sorted by source.
    pub fn in_edges(&self, i: usize) -> &[(usize, u64)] {
        &self.inc[i]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.inc[i].len()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out[i].len()
    }

    pub fn weight(&self, s: usize, t: usize) -> Option<u64> {
        self.out[s].binary_search_by_key(&t, |e| e.0).ok().map(|k| self.out[s][k].1)
    }

    /// All edges as `(source, target, weight)` in (source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(s, adj)| adj.iter().map(move |&(t, w)| (s, t, w)))
    }

    pub fn node_set(&self) -> NodeSet {
        NodeSet(self.ids.iter().cloned().collect())
    }

    /// Weakly connected components as index lists, each sorted, ordered by
    /// smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let c = out.len();
            let mut members = vec![start];
            comp[start] = c;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &(v, _) in self.out[u].iter().chain(self.inc[u].iter()) {
                    if comp[v] == usize::MAX {
                        comp[v] = c;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.node_count() > 0 && self.weak_components().len() == 1
    }

    /// Graph on `members` keeping edges with both endpoints inside.
    pub fn induced_subgraph(&self, members: &NodeSet) -> EndorsementGraph {
        self.filtered(members, |s, t| members.contains(s) && members.contains(t))
    }

    /// Graph keeping every edge whose source is in `members`; targets may
    /// lie outside. Members without out-edges stay as isolated nodes.
    pub fn out_edge_induced_subgraph(&self, members: &NodeSet) -> EndorsementGraph {
        self.filtered(members, |s, _| members.contains(s))
    }

    fn filtered(&self, members: &NodeSet, keep: impl Fn(&str, &str) -> bool) -> EndorsementGraph {
        let mut b = GraphBuilder::new();
        for m in members.iter().filter(|m| self.contains(m)) {
            b.add_node(m);
        }
        for (s, t, w) in self.edges() {
            if keep(&self.ids[s], &self.ids[t]) {
                b.add(&self.ids[s], &self.ids[t], w);
            }
        }
        b.finish(self.min_weight)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GraphError> {
        let mut wtr = csv::Writer::from_writer(w);
        for (s, t, weight) in self.edges() {
            wtr.serialize(EdgeRow {
                source: self.ids[s].clone(),
                target: self.ids[t].clone(),
                weight,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a `source,target,weight` edge list. Isolated nodes are not
    /// representable in this format.
    pub fn read_csv<R: Read>(r: R, min_weight: u64) -> Result<Self, GraphError> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows: Vec<EdgeRow> = rdr.deserialize().collect::<Result<_, _>>()?;
        Self::from_edges(
            std::iter::empty(),
            rows.iter().map(|e| (e.source.as_str(), e.target.as_str(), e.weight)),
            min_weight,
        )
    }
}

/// Largest weakly connected component; ties go to the component holding
/// the smallest user id.
pub fn giant_component(g: &EndorsementGraph) -> NodeSet {
    let comps = g.weak_components();
    // Components are ordered by smallest member, so the first maximum wins.
    let best = comps.iter().fold(None::<&Vec<usize>>, |best, c| match best {
        Some(b) if b.len() >= c.len() => Some(b),
        _ => Some(c),
    });
    best.map(|c| c.iter().map(|&i| g.ids[i].clone()).collect())
        .unwrap_or_default()
}

/// Symmetrized view in compressed adjacency form: the weight between `u`
/// and `v` is `w(u->v) + w(v->u)`.
#[derive(Debug, Clone)]
pub struct UndirectedGraph {
    pub xadj: Vec<usize>,
    pub adjncy: Vec<usize>,
    pub adjwgt: Vec<u64>,
}

impl UndirectedGraph {
    pub fn from_directed(g: &EndorsementGraph) -> Self {
        let n = g.node_count();
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        xadj.push(0);
        for u in 0..n {
            // Merge the two sorted adjacency lists.
            let (o, i) = (g.out_edges(u), g.in_edges(u));
            let (mut a, mut b) = (0, 0);
            while a < o.len() || b < i.len() {
                let next = match (o.get(a), i.get(b)) {
                    (Some(x), Some(y)) if x.0 == y.0 => {
                        a += 1;
                        b += 1;
                        (x.0, x.1 + y.1)
                    }
                    (Some(x), Some(y)) if x.0 < y.0 => {
                        a += 1;
                        *x
                    }
                    (Some(x), None) => {
                        a += 1;
                        *x
                    }
                    (_, Some(y)) => {
                        b += 1;
                        *y
                    }
                    (None, None) => unreachable!(),
                };
                adjncy.push(next.0);
                adjwgt.push(next.1);
            }
            xadj.push(adjncy.len());
        }
        UndirectedGraph { xadj, adjncy, adjwgt }
    }

    pub fn node_count(&self) -> usize {
        self.xadj.len() - 1
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()].iter().copied().zip(self.adjwgt[r].iter().copied())
    }

    pub fn degree(&self, u: usize) -> usize {
        self.xadj[u + 1] - self.xadj[u]
    }

    pub fn weighted_degree(&self, u: usize) -> u64 {
        self.adjwgt[self.xadj[u]..self.xadj[u + 1]].iter().sum()
    }

    /// Sum of undirected edge weights, each pair counted once.
    pub fn total_weight(&self) -> u64 {
        self.adjwgt.iter().sum::<u64>() / 2
    }
}
