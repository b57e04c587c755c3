//! Newman modularity on the symmetrized graph and Louvain optimization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::graph::{EndorsementGraph, UndirectedGraph};

/// `Q = sum_c (e_c / m - (d_c / 2m)^2)` with symmetrized weights, where
/// `e_c` is the weight inside group `c` and `d_c` its degree sum.
/// `groups` is indexed like the graph's nodes.
pub fn modularity(g: &EndorsementGraph, groups: &[usize]) -> Result<f64, PartitionError> {
    if groups.len() != g.node_count() {
        return Err(PartitionError::AssignmentLength {
            expected: g.node_count(),
            got: groups.len(),
        });
    }
    let ug = UndirectedGraph::from_directed(g);
    if ug.total_weight() == 0 {
        return Err(PartitionError::EmptyGraph);
    }
    Ok(undirected_modularity(&ug, groups))
}

pub(crate) fn undirected_modularity(ug: &UndirectedGraph, groups: &[usize]) -> f64 {
    let k = groups.iter().copied().max().map_or(0, |m| m + 1);
    let mut inside2 = vec![0.0f64; k];
    let mut degree = vec![0.0f64; k];
    for (u, &cu) in groups.iter().enumerate() {
        for (v, w) in ug.neighbors(u) {
            degree[cu] += w as f64;
            if groups[v] == cu {
                inside2[cu] += w as f64;
            }
        }
    }
    let two_m = 2.0 * ug.total_weight() as f64;
    inside2
        .iter()
        .zip(&degree)
        .map(|(&e2, &d)| e2 / two_m - (d / two_m) * (d / two_m))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LouvainResult {
    /// Community of each node, numbered by first appearance in node order.
    pub groups: Vec<usize>,
    pub communities: usize,
    pub modularity: f64,
}

/// Aggregated graph used between Louvain levels. `self_loop[i]` follows the
/// adjacency-matrix convention (twice the internal edge weight), so
/// `degree[i]` is its row sum.
struct Meta {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
}

impl Meta {
    fn from_undirected(ug: &UndirectedGraph) -> Self {
        let n = ug.node_count();
        let adj: Vec<Vec<(usize, f64)>> =
            (0..n).map(|u| ug.neighbors(u).map(|(v, w)| (v, w as f64)).collect()).collect();
        let degree = adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
        Meta {
            adj,
            self_loop: vec![0.0; n],
            degree,
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns each node's community (renumbered
    /// densely) and whether any node moved.
    fn local_moves(&self, two_m: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.n();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut link = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                let ki = self.degree[i];
                for &(j, w) in &self.adj[i] {
                    let cj = comm[j];
                    if link[cj] == 0.0 && !touched.contains(&cj) {
                        touched.push(cj);
                    }
                    link[cj] += w;
                }
                tot[ci] -= ki;
                let mut best = ci;
                let mut best_gain = link[ci] - tot[ci] * ki / two_m;
                for &c in &touched {
                    let gain = link[c] - tot[c] * ki / two_m;
                    if gain > best_gain + 1e-12 {
                        best = c;
                        best_gain = gain;
                    }
                }
                tot[best] += ki;
                if best != ci {
                    comm[i] = best;
                    moved = true;
                }
                for &c in &touched {
                    link[c] = 0.0;
                }
                link[ci] = 0.0;
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (renumber(&comm), any_move)
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> Meta {
        let mut self_loop = vec![0.0; k];
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for i in 0..self.n() {
            let ci = comm[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *rows[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        let degree = adj
            .iter()
            .zip(&self_loop)
            .map(|(a, s)| a.iter().map(|e| e.1).sum::<f64>() + s)
            .collect();
        Meta { adj, self_loop, degree }
    }
}

/// Dense renumbering by first appearance.
fn renumber(comm: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; comm.len().max(comm.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    comm.iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect()
}

/// Greedy multi-level modularity maximization (local moving plus
/// aggregation). The node visiting order at each level is drawn from
/// `seed`.
pub fn louvain(g: &EndorsementGraph, seed: u64) -> Result<LouvainResult, PartitionError> {
    if g.node_count() == 0 {
        return Err(PartitionError::EmptyGraph);
    }
    let ug = UndirectedGraph::from_directed(g);
    let n = g.node_count();
    if ug.total_weight() == 0 {
        return Ok(LouvainResult {
            groups: (0..n).collect(),
            communities: n,
            modularity: 0.0,
        });
    }
    let two_m = 2.0 * ug.total_weight() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut meta = Meta::from_undirected(&ug);
    let mut best_q = undirected_modularity(&ug, &membership);
    loop {
        let (comm, moved) = meta.local_moves(two_m, &mut rng);
        let k = comm.iter().copied().max().map_or(0, |m| m + 1);
        if !moved || k == meta.n() {
            break;
        }
        let candidate: Vec<usize> = membership.iter().map(|&c| comm[c]).collect();
        let q = undirected_modularity(&ug, &candidate);
        if q <= best_q + 1e-12 {
            break;
        }
        best_q = q;
        membership = candidate;
        meta = meta.aggregate(&comm, k);
    }
    let groups = renumber(&membership);
    let communities = groups.iter().copied().max().map_or(0, |m| m + 1);
    Ok(LouvainResult {
        groups,
        communities,
        modularity: best_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_edges(names: &[String], out: &mut Vec<(String, String, u64)>) {
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                out.push((names[i].clone(), names[j].clone(), 1));
            }
        }
    }

    fn graph(edges: &[(String, String, u64)]) -> EndorsementGraph {
        EndorsementGraph::from_edges([], edges.iter().map(|(a, b, w)| (a.as_str(), b.as_str(), *w)), 1).unwrap()
    }

    #[test]
    fn one_group_is_zero() {
        let g = EndorsementGraph::from_edges([], [("a", "b", 3), ("b", "c", 1), ("c", "a", 2)], 1).unwrap();
        assert_eq!(modularity(&g, &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn two_triangles_hand_value() {
        // Triangles {a,b,c} and {d,e,f} joined by c-d: 7 unit edges, m = 7.
        // Each side: e_c = 3, d_c = 7. Q = 2 * (3/7 - (7/14)^2) = 6/7 - 1/2.
        let g = EndorsementGraph::from_edges(
            [],
            [("a", "b", 1), ("b", "c", 1), ("a", "c", 1), ("d", "e", 1), ("e", "f", 1), ("d", "f", 1), ("c", "d", 1)],
            1,
        )
        .unwrap();
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((q - (6.0 / 7.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn empty_graph_errors() {
        let g = EndorsementGraph::from_edges(["a"], [], 1).unwrap();
        assert!(modularity(&g, &[0]).is_err());
        assert!(modularity(&EndorsementGraph::empty(), &[]).is_err());
    }

    #[test]
    fn louvain_disconnected_cliques() {
        let a: Vec<String> = (0..5).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..5).map(|i| format!("b{i}")).collect();
        let mut edges = Vec::new();
        clique_edges(&a, &mut edges);
        clique_edges(&b, &mut edges);
        let g = graph(&edges);
        let r = louvain(&g, 1).unwrap();
        assert_eq!(r.communities, 2);
        assert_eq!(r.groups, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!((r.modularity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn louvain_ring_of_cliques() {
        let mut edges = Vec::new();
        let cliques: Vec<Vec<String>> = (0..4).map(|c| (0..5).map(|i| format!("c{c}n{i}")).collect()).collect();
        for c in &cliques {
            clique_edges(c, &mut edges);
        }
        for c in 0..4 {
            edges.push((cliques[c][0].clone(), cliques[(c + 1) % 4][1].clone(), 1));
        }
        let g = graph(&edges);
        for seed in 0..5 {
            let r = louvain(&g, seed).unwrap();
            assert_eq!(r.communities, 4, "seed {seed}");
            let q = modularity(&g, &r.groups).unwrap();
            assert!((q - r.modularity).abs() < 1e-12);
            // Each clique: e = 10, d = 22; m = 44.
            let expect = 4.0 * (10.0 / 44.0 - (22.0f64 / 88.0).powi(2));
            assert!((q - expect).abs() < 1e-12);
        }
    }
}
