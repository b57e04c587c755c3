//! Multilevel two-way partitioning: heavy-edge matching coarsening,
//! greedy region growing on the coarsest graph, and boundary
//! Fiduccia-Mattheyses refinement during uncoarsening.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::graph::{EndorsementGraph, UndirectedGraph};

/// Coarsening stops once the graph has at most this many vertices.
pub const COARSEN_TO: usize = 64;
/// Allowed deviation of each side from its target size, as a fraction of
/// the smaller target.
pub const IMBALANCE_TOLERANCE: f64 = 0.03;
const INIT_TRIALS: usize = 8;
const MAX_FM_PASSES: usize = 10;
/// A level that shrinks by less than 5% counts as stalled.
const MIN_SHRINK: f64 = 0.95;

/// Two-way assignment of the nodes of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub ids: Vec<String>,
    pub sides: Vec<u8>,
    /// Target size of side 1 relative to side 0.
    pub balance_ratio: f64,
    pub cut: u64,
    pub side_sizes: [usize; 2],
    /// Fraction of nodes on the larger side.
    pub imbalance: f64,
}

/// Admissible range of side-1 vertex weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceWindow {
    pub lo: i64,
    pub hi: i64,
}

impl BalanceWindow {
    /// Side 1 targets `total * r / (1 + r)`, give or take 3% of the smaller
    /// target. When that interval holds no integer the nearest integer to
    /// the target is used. Returns `None` if a side would be empty.
    pub fn for_ratio(total: i64, ratio: f64) -> Option<Self> {
        if total < 2 || !ratio.is_finite() || ratio <= 0.0 {
            return None;
        }
        let t1 = total as f64 * ratio / (1.0 + ratio);
        let t0 = total as f64 - t1;
        let tol = IMBALANCE_TOLERANCE * t0.min(t1);
        let mut lo = (t1 - tol - 1e-9).ceil() as i64;
        let mut hi = (t1 + tol + 1e-9).floor() as i64;
        if lo > hi {
            lo = t1.round() as i64;
            hi = lo;
        }
        let lo = lo.max(1);
        let hi = hi.min(total - 1);
        (lo <= hi).then_some(BalanceWindow { lo, hi })
    }

    pub fn distance(&self, w1: i64) -> i64 {
        if w1 < self.lo {
            self.lo - w1
        } else if w1 > self.hi {
            w1 - self.hi
        } else {
            0
        }
    }
}

/// Working graph with vertex weights, in compressed adjacency form.
#[derive(Debug, Clone)]
struct Level {
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    adjwgt: Vec<i64>,
    vwgt: Vec<i64>,
}

impl Level {
    fn from_undirected(g: &UndirectedGraph) -> Self {
        Level {
            xadj: g.xadj.clone(),
            adjncy: g.adjncy.clone(),
            adjwgt: g.adjwgt.iter().map(|&w| w as i64).collect(),
            vwgt: vec![1; g.node_count()],
        }
    }

    fn n(&self) -> usize {
        self.vwgt.len()
    }

    fn nbrs(&self, u: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()].iter().copied().zip(self.adjwgt[r].iter().copied())
    }

    fn cut(&self, part: &[u8]) -> i64 {
        let mut c = 0;
        for u in 0..self.n() {
            for (v, w) in self.nbrs(u) {
                if part[u] != part[v] {
                    c += w;
                }
            }
        }
        c / 2
    }

    fn side_weights(&self, part: &[u8]) -> [i64; 2] {
        let mut pw = [0i64; 2];
        for (u, &p) in part.iter().enumerate() {
            pw[p as usize] += self.vwgt[u];
        }
        pw
    }
}

/// One round of heavy-edge matching. Vertices are visited in random order
/// and matched to the unmatched neighbor behind their heaviest edge.
fn coarsen(g: &Level, rng: &mut ChaCha8Rng, max_vwgt: i64) -> (Level, Vec<usize>) {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    const FREE: usize = usize::MAX;
    let mut mate = vec![FREE; n];
    for &u in &order {
        if mate[u] != FREE {
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for (v, w) in g.nbrs(u) {
            if mate[v] != FREE || v == u || g.vwgt[u] + g.vwgt[v] > max_vwgt {
                continue;
            }
            if best.is_none_or(|(bw, bv)| w > bw || (w == bw && v < bv)) {
                best = Some((w, v));
            }
        }
        match best {
            Some((_, v)) => {
                mate[u] = v;
                mate[v] = u;
            }
            None => mate[u] = u,
        }
    }

    let mut cmap = vec![FREE; n];
    let mut cn = 0;
    for u in 0..n {
        if cmap[u] == FREE {
            cmap[u] = cn;
            cmap[mate[u]] = cn;
            cn += 1;
        }
    }

    let mut members: Vec<[usize; 2]> = vec![[FREE; 2]; cn];
    for u in 0..n {
        let m = &mut members[cmap[u]];
        if m[0] == FREE {
            m[0] = u;
        } else {
            m[1] = u;
        }
    }

    let mut xadj = Vec::with_capacity(cn + 1);
    let mut adjncy = Vec::new();
    let mut adjwgt: Vec<i64> = Vec::new();
    let mut vwgt = Vec::with_capacity(cn);
    let mut slot = vec![FREE; cn];
    xadj.push(0);
    for (c, m) in members.iter().enumerate() {
        let start = adjncy.len();
        let mut w = 0;
        for &u in m.iter().filter(|&&u| u != FREE) {
            w += g.vwgt[u];
            for (v, ew) in g.nbrs(u) {
                let cv = cmap[v];
                if cv == c {
                    continue;
                }
                if slot[cv] == FREE {
                    slot[cv] = adjncy.len();
                    adjncy.push(cv);
                    adjwgt.push(ew);
                } else {
                    adjwgt[slot[cv]] += ew;
                }
            }
        }
        for &cv in &adjncy[start..] {
            slot[cv] = FREE;
        }
        vwgt.push(w);
        xadj.push(adjncy.len());
    }
    (Level { xadj, adjncy, adjwgt, vwgt }, cmap)
}

/// Grows side 1 from `start`, always absorbing the frontier vertex with the
/// largest share of its edge weight already inside the region, until the
/// region's weight enters the window. The share (rather than the raw cut
/// gain) keeps light vertices of a neighboring cluster from being pulled in
/// ahead of heavy vertices of the region's own cluster.
fn grow_region(g: &Level, window: BalanceWindow, start: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    const SCALE: f64 = 1e9;
    let n = g.n();
    let mut part = vec![0u8; n];
    let wdeg: Vec<i64> = (0..n).map(|u| g.nbrs(u).map(|(_, w)| w).sum()).collect();
    let mut conn = vec![0i64; n];
    let key = |c: i64, d: i64| if d == 0 { 0 } else { (c as f64 / d as f64 * SCALE) as i64 };
    let mut heap = BinaryHeap::new();
    let mut w1 = 0i64;
    heap.push((0i64, Reverse(start)));
    loop {
        if w1 >= window.lo {
            break;
        }
        let u = match heap.pop() {
            Some((k, Reverse(u))) => {
                if part[u] == 1 || (k != key(conn[u], wdeg[u]) && u != start) {
                    continue;
                }
                u
            }
            None => {
                // Frontier exhausted (only on disconnected coarse graphs).
                let rest: Vec<usize> = (0..n).filter(|&u| part[u] == 0).collect();
                match rest.get(rng.random_range(0..rest.len().max(1))) {
                    Some(&u) => u,
                    None => break,
                }
            }
        };
        if w1 + g.vwgt[u] > window.hi && w1 > 0 {
            // Overshooting; accept only if it still lands closer.
            if window.distance(w1 + g.vwgt[u]) >= window.distance(w1) {
                break;
            }
        }
        part[u] = 1;
        w1 += g.vwgt[u];
        for (v, w) in g.nbrs(u) {
            if part[v] == 0 {
                conn[v] += w;
                heap.push((key(conn[v], wdeg[v]), Reverse(v)));
            }
        }
    }
    part
}

/// One FM pass. Moves the best-gain boundary vertex under the balance
/// constraint, locks it, and finally rolls back to the best prefix ranked
/// by (balance violation, cut). Returns whether that prefix improved on the
/// starting state.
fn fm_pass(g: &Level, part: &mut [u8], window: BalanceWindow) -> bool {
    let n = g.n();
    let mut pw = g.side_weights(part);
    let mut cut = g.cut(part);
    let mut gain = vec![0i64; n];
    let mut boundary = vec![false; n];
    for u in 0..n {
        for (v, w) in g.nbrs(u) {
            if part[v] != part[u] {
                gain[u] += w;
                boundary[u] = true;
            } else {
                gain[u] -= w;
            }
        }
    }
    // One queue per side; a side whose best move would break the balance
    // waits until a move on the other side makes room.
    let mut heaps: [BinaryHeap<(i64, Reverse<usize>)>; 2] = [BinaryHeap::new(), BinaryHeap::new()];
    for u in (0..n).filter(|&u| boundary[u]) {
        heaps[part[u] as usize].push((gain[u], Reverse(u)));
    }
    let mut locked = vec![false; n];
    let mut moves: Vec<usize> = Vec::new();
    let start = (window.distance(pw[1]), cut);
    let mut best = start;
    let mut best_len = 0;
    let mut since_best = 0;
    let limit = (n / 10).clamp(25, 200);

    loop {
        let mut pick: Option<(i64, usize)> = None;
        for (side, heap) in heaps.iter_mut().enumerate() {
            while let Some(&(gu, Reverse(u))) = heap.peek() {
                if locked[u] || gu != gain[u] || part[u] as usize != side {
                    heap.pop();
                    continue;
                }
                let w1_new = if side == 0 { pw[1] + g.vwgt[u] } else { pw[1] - g.vwgt[u] };
                let (d_now, d_new) = (window.distance(pw[1]), window.distance(w1_new));
                if (d_new == 0 || d_new < d_now) && pick.is_none_or(|(pg, pu)| gu > pg || (gu == pg && u < pu)) {
                    pick = Some((gu, u));
                }
                break;
            }
        }
        let Some((gu, u)) = pick else { break };
        heaps[part[u] as usize].pop();
        let from = part[u] as usize;
        part[u] = 1 - part[u];
        pw[from] -= g.vwgt[u];
        pw[1 - from] += g.vwgt[u];
        cut -= gu;
        gain[u] = -gu;
        locked[u] = true;
        moves.push(u);
        let to = part[u];
        for (v, w) in g.nbrs(u) {
            if part[v] == to {
                gain[v] -= 2 * w;
            } else {
                gain[v] += 2 * w;
            }
            if !locked[v] {
                heaps[part[v] as usize].push((gain[v], Reverse(v)));
            }
        }
        let score = (window.distance(pw[1]), cut);
        if score < best {
            best = score;
            best_len = moves.len();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > limit {
                break;
            }
        }
    }
    for &u in moves[best_len..].iter().rev() {
        part[u] = 1 - part[u];
    }
    best < start
}

/// Runs FM passes until one fails to improve. Returns the cut before the
/// first pass followed by the cut after each pass.
fn fm_refine(g: &Level, part: &mut [u8], window: BalanceWindow) -> Vec<i64> {
    let mut history = vec![g.cut(part)];
    for _ in 0..MAX_FM_PASSES {
        let improved = fm_pass(g, part, window);
        history.push(g.cut(part));
        if !improved {
            break;
        }
    }
    history
}

fn initial_bisection(g: &Level, window: BalanceWindow, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut best: Option<((i64, i64), Vec<u8>)> = None;
    for _ in 0..INIT_TRIALS {
        let start = rng.random_range(0..g.n());
        let mut part = grow_region(g, window, start, rng);
        fm_refine(g, &mut part, window);
        let score = (window.distance(g.side_weights(&part)[1]), g.cut(&part));
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, part));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| vec![0; g.n()])
}

fn check_input(g: &EndorsementGraph, ratio: f64) -> Result<BalanceWindow, PartitionError> {
    if !ratio.is_finite() || ratio <= 0.0 {
        return Err(PartitionError::InvalidRatio(ratio));
    }
    if g.node_count() < 2 {
        return Err(PartitionError::TooSmall(g.node_count()));
    }
    if !g.is_weakly_connected() {
        return Err(PartitionError::Disconnected);
    }
    BalanceWindow::for_ratio(g.node_count() as i64, ratio).ok_or(PartitionError::InvalidRatio(ratio))
}

fn assignment(g: &EndorsementGraph, level: &Level, sides: Vec<u8>, ratio: f64) -> PartitionAssignment {
    let n1 = sides.iter().filter(|&&s| s == 1).count();
    let sizes = [sides.len() - n1, n1];
    PartitionAssignment {
        ids: g.ids().to_vec(),
        cut: level.cut(&sides) as u64,
        sides,
        balance_ratio: ratio,
        side_sizes: sizes,
        imbalance: sizes[0].max(sizes[1]) as f64 / g.node_count() as f64,
    }
}

/// Bisects a weakly connected graph so that side 1 holds about
/// `ratio / (1 + ratio)` of the nodes, minimizing the symmetrized weighted
/// edge cut. Deterministic in `(graph, ratio, seed)`.
pub fn bisect(g: &EndorsementGraph, ratio: f64, seed: u64) -> Result<PartitionAssignment, PartitionError> {
    let window = check_input(g, ratio)?;
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let finest = Level::from_undirected(&UndirectedGraph::from_directed(g));
    let max_vwgt = ((1.5 * n as f64) / COARSEN_TO as f64).ceil().max(2.0) as i64;

    let mut levels: Vec<(Level, Vec<usize>)> = Vec::new();
    let mut current = finest;
    while current.n() > COARSEN_TO {
        let (coarse, cmap) = coarsen(&current, &mut rng, max_vwgt);
        if coarse.n() as f64 > MIN_SHRINK * current.n() as f64 {
            break;
        }
        levels.push((std::mem::replace(&mut current, coarse), cmap));
    }

    let mut part = initial_bisection(&current, window, &mut rng);
    while let Some((fine, cmap)) = levels.pop() {
        part = cmap.iter().map(|&c| part[c]).collect();
        current = fine;
        fm_refine(&current, &mut part, window);
    }

    let violation = window.distance(current.side_weights(&part)[1]);
    if violation > 0 {
        return Err(PartitionError::Unbalanced {
            side1: current.side_weights(&part)[1] as usize,
            lo: window.lo as usize,
            hi: window.hi as usize,
        });
    }
    Ok(assignment(g, &current, part, ratio))
}

/// Applies FM refinement to an existing assignment of a connected graph and
/// returns the cut before and after every pass.
pub fn refine(g: &EndorsementGraph, sides: &mut [u8], ratio: f64) -> Result<Vec<u64>, PartitionError> {
    let window = check_input(g, ratio)?;
    let level = Level::from_undirected(&UndirectedGraph::from_directed(g));
    Ok(fm_refine(&level, sides, window).into_iter().map(|c| c as u64).collect())
}

/// Weighted cut of `sides` on the symmetrized graph.
pub fn cut_weight(g: &EndorsementGraph, sides: &[u8]) -> u64 {
    Level::from_undirected(&UndirectedGraph::from_directed(g)).cut(sides) as u64
}
