//! Stance detection on the endorsement graph.
//!
//! The graph is bisected many times with different seeds; each node's
//! polarity score is the fraction of (label-aligned) runs that put it on
//! side 1. A few hand-labeled anchor accounts then name the two poles.

mod bisect;
mod modularity;

pub use bisect::{bisect, cut_weight, refine, BalanceWindow, PartitionAssignment, COARSEN_TO, IMBALANCE_TOLERANCE};
pub use modularity::{louvain, modularity, LouvainResult};

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::EndorsementGraph;

/// Polarity at or beyond these bounds counts as an extreme (confident) node.
pub const EXTREME_LOW: f64 = 0.05;
pub const EXTREME_HIGH: f64 = 0.95;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("graph is not weakly connected; pass the giant component")]
    Disconnected,
    #[error("graph has {0} nodes; at least 2 are required")]
    TooSmall(usize),
    #[error("balance ratio {0} leaves a side empty or is not positive")]
    InvalidRatio(f64),
    #[error("side 1 weight {side1} outside [{lo}, {hi}] after refinement")]
    Unbalanced { side1: usize, lo: usize, hi: usize },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("assignment covers {got} nodes, graph has {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("at least one run and one candidate ratio are required")]
    NoRuns,
    #[error("no anchor is present in the scored graph with a decided polarity")]
    NoAnchors,
    #[error("anchors contradict each other: {0}")]
    ContradictoryAnchors(String),
    #[error("anchor {0} must be declared control or rights")]
    UndeclaredAnchor(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Stance of a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Control,
    Rights,
    Unknown,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Control => "control",
            Side::Rights => "rights",
            Side::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(Side::Control),
            "rights" => Ok(Side::Rights),
            "unknown" => Ok(Side::Unknown),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// Per-node fraction of aligned ensemble runs placing the node on side 1.
/// `ids` are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityScores {
    pub ids: Vec<String>,
    pub side1_counts: Vec<u32>,
    pub runs: u32,
    pub base_seed: u64,
    pub balance_ratio: f64,
}

impl PolarityScores {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn polarity(&self, i: usize) -> f64 {
        self.side1_counts[i] as f64 / self.runs as f64
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.binary_search_by(|x| x.as_str().cmp(id)).ok().map(|i| self.polarity(i))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.polarity(i))
    }

    /// Nodes with polarity `<= 0.05` or `>= 0.95`.
    pub fn extreme_count(&self) -> usize {
        self.values().filter(|&p| p <= EXTREME_LOW || p >= EXTREME_HIGH).count()
    }
}

/// Orients an assignment by a label-free rule: side 1 is the larger side;
/// with equal sizes, node 0 sits on side 0.
fn canonical(sides: &[u8]) -> bool {
    let ones = sides.iter().filter(|&&s| s == 1).count();
    let zeros = sides.len() - ones;
    ones < zeros || (ones == zeros && sides.first() == Some(&1))
}

/// Combines raw run assignments into polarity scores. Run 0 is oriented
/// canonically, every other run is flipped when that increases its overlap
/// with run 0 (exact ties fall back to the canonical orientation).
pub fn polarity_from_runs(ids: Vec<String>, runs: &[Vec<u8>], base_seed: u64, ratio: f64) -> PolarityScores {
    let n = ids.len();
    let mut counts = vec![0u32; n];
    let mut reference: Vec<u8> = Vec::new();
    for (r, sides) in runs.iter().enumerate() {
        let flip = if r == 0 {
            canonical(sides)
        } else {
            let agree = sides.iter().zip(&reference).filter(|(a, b)| a == b).count();
            match (2 * agree).cmp(&n) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => canonical(sides),
            }
        };
        let aligned: Vec<u8> = sides.iter().map(|&s| if flip { 1 - s } else { s }).collect();
        for (c, &s) in counts.iter_mut().zip(&aligned) {
            *c += s as u32;
        }
        if r == 0 {
            reference = aligned;
        }
    }
    PolarityScores {
        ids,
        side1_counts: counts,
        runs: runs.len() as u32,
        base_seed,
        balance_ratio: ratio,
    }
}

/// Bisects `g` `runs` times with seeds `base_seed..base_seed + runs` and
/// aggregates the aligned assignments. Runs execute in parallel; the result
/// does not depend on scheduling.
pub fn ensemble_polarity(
    g: &EndorsementGraph,
    runs: u32,
    ratio: f64,
    base_seed: u64,
) -> Result<PolarityScores, PartitionError> {
    if runs == 0 {
        return Err(PartitionError::NoRuns);
    }
    let assignments: Vec<Vec<u8>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| bisect(g, ratio, base_seed.wrapping_add(r)).map(|a| a.sides))
        .collect::<Result<_, _>>()?;
    Ok(polarity_from_runs(g.ids().to_vec(), &assignments, base_seed, ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSearch {
    pub best_ratio: f64,
    pub scores: PolarityScores,
    /// `(ratio, extreme node count)` per candidate, in input order.
    pub candidates: Vec<(f64, usize)>,
}

/// Picks the size ratio that maximizes the number of extreme nodes. Ties go
/// to the ratio closest to 1, then to the smaller ratio.
pub fn optimize_balance(
    g: &EndorsementGraph,
    candidates: &[f64],
    runs: u32,
    base_seed: u64,
) -> Result<BalanceSearch, PartitionError> {
    let mut best: Option<(f64, usize, PolarityScores)> = None;
    let mut table = Vec::with_capacity(candidates.len());
    for &ratio in candidates {
        let scores = ensemble_polarity(g, runs, ratio, base_seed)?;
        let count = scores.extreme_count();
        table.push((ratio, count));
        let better = match &best {
            None => true,
            Some((br, bc, _)) => {
                count > *bc
                    || (count == *bc
                        && ((ratio - 1.0).abs() < (br - 1.0).abs()
                            || ((ratio - 1.0).abs() == (br - 1.0).abs() && ratio < *br)))
            }
        };
        if better {
            best = Some((ratio, count, scores));
        }
    }
    let (best_ratio, _, scores) = best.ok_or(PartitionError::NoRuns)?;
    Ok(BalanceSearch {
        best_ratio,
        scores,
        candidates: table,
    })
}

/// Discrete stance per scored node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideLabels {
    pub ids: Vec<String>,
    pub polarity: Vec<f64>,
    pub labels: Vec<Side>,
    /// Anchors that were found in the scores, with their declared sides.
    pub anchors: Vec<(String, Side)>,
    /// Whether the `p >= 0.5` pole was named rights.
    pub rights_high: bool,
}

impl SideLabels {
    pub fn get(&self, id: &str) -> Option<Side> {
        self.ids.binary_search_by(|x| x.as_str().cmp(id)).ok().map(|i| self.labels[i])
    }

    pub fn count(&self, side: Side) -> usize {
        self.labels.iter().filter(|&&s| s == side).count()
    }

    pub fn as_map(&self) -> HashMap<String, Side> {
        self.ids.iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    /// `user_id,polarity,side` rows in id order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PartitionError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["user_id", "polarity", "side"])?;
        for ((id, p), s) in self.ids.iter().zip(&self.polarity).zip(&self.labels) {
            wtr.write_record([id.as_str(), &format!("{p:.4}"), s.as_str()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Names the two polarity poles from anchor accounts. The pole holding most
/// rights anchors becomes rights (control anchors decide when rights
/// anchors are absent or split evenly). Nodes at exactly 0.5 are unknown;
/// anchors keep their declared side.
pub fn label_sides(scores: &PolarityScores, anchors: &[(String, Side)]) -> Result<SideLabels, PartitionError> {
    let mut used = Vec::new();
    // [pole][side]: pole 0 = p < 0.5, pole 1 = p > 0.5; side 0 = control, 1 = rights.
    let mut tally = [[0usize; 2]; 2];
    for (id, side) in anchors {
        let s = match side {
            Side::Control => 0,
            Side::Rights => 1,
            Side::Unknown => return Err(PartitionError::UndeclaredAnchor(id.clone())),
        };
        let Some(p) = scores.get(id) else { continue };
        used.push((id.clone(), *side));
        if p == 0.5 {
            continue;
        }
        tally[(p > 0.5) as usize][s] += 1;
    }
    if tally.iter().flatten().all(|&c| c == 0) {
        return Err(PartitionError::NoAnchors);
    }
    for (pole, name) in [(0, "p < 0.5"), (1, "p > 0.5")] {
        if tally[pole][0] > 0 && tally[pole][1] > 0 {
            return Err(PartitionError::ContradictoryAnchors(format!(
                "control and rights anchors share the {name} pole"
            )));
        }
    }
    let rights_high = if tally[1][1] != tally[0][1] {
        tally[1][1] > tally[0][1]
    } else if tally[0][0] != tally[1][0] {
        tally[0][0] > tally[1][0]
    } else {
        return Err(PartitionError::ContradictoryAnchors("anchors split evenly across poles".into()));
    };
    let declared: HashMap<&str, Side> = used.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let polarity: Vec<f64> = scores.values().collect();
    let labels = scores
        .ids
        .iter()
        .zip(&polarity)
        .map(|(id, &p)| {
            if let Some(&s) = declared.get(id.as_str()) {
                return s;
            }
            if p == 0.5 {
                Side::Unknown
            } else if (p > 0.5) == rights_high {
                Side::Rights
            } else {
                Side::Control
            }
        })
        .collect();
    Ok(SideLabels {
        ids: scores.ids.clone(),
        polarity,
        labels,
        anchors: used,
        rights_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn unanimous_runs() {
        let runs = vec![vec![0, 0, 1, 1, 1], vec![1, 1, 0, 0, 0], vec![0, 0, 1, 1, 1]];
        let s = polarity_from_runs(ids(5), &runs, 0, 1.5);
        let p: Vec<f64> = s.values().collect();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.extreme_count(), 5);
    }

    #[test]
    fn one_disagreement_gives_half() {
        let runs = vec![vec![0, 0, 1, 1, 1, 0], vec![0, 1, 1, 1, 1, 0]];
        let s = polarity_from_runs(ids(6), &runs, 0, 1.0);
        assert_eq!(s.polarity(1), 0.5);
        assert_eq!(s.runs, 2);
    }

    #[test]
    fn flipping_any_run_is_invisible() {
        let runs = vec![
            vec![0, 0, 1, 1, 1, 0, 1],
            vec![1, 1, 0, 0, 1, 1, 0],
            vec![0, 1, 1, 1, 0, 0, 1],
            vec![1, 0, 1, 0, 1, 0, 1],
        ];
        let base = polarity_from_runs(ids(7), &runs, 0, 1.0);
        for r in 0..runs.len() {
            let mut flipped = runs.clone();
            flipped[r].iter_mut().for_each(|s| *s = 1 - *s);
            assert_eq!(polarity_from_runs(ids(7), &flipped, 0, 1.0), base, "run {r}");
        }
    }

    fn scores(ps: &[(u32, u32)]) -> PolarityScores {
        PolarityScores {
            ids: ids(ps.len()),
            side1_counts: ps.iter().map(|p| p.0).collect(),
            runs: ps[0].1,
            base_seed: 0,
            balance_ratio: 1.0,
        }
    }

    #[test]
    fn single_anchor_names_pole() {
        let s = scores(&[(98, 100), (90, 100), (50, 100), (3, 100)]);
        let l = label_sides(&s, &[("u0".into(), Side::Rights)]).unwrap();
        assert_eq!(l.labels, vec![Side::Rights, Side::Rights, Side::Unknown, Side::Control]);
        let l = label_sides(&s, &[("u3".into(), Side::Rights)]).unwrap();
        assert_eq!(l.labels, vec![Side::Control, Side::Control, Side::Unknown, Side::Rights]);
    }

    #[test]
    fn anchor_errors() {
        let s = scores(&[(98, 100), (90, 100), (50, 100), (3, 100)]);
        assert!(matches!(label_sides(&s, &[]), Err(PartitionError::NoAnchors)));
        assert!(matches!(
            label_sides(&s, &[("zz".into(), Side::Rights)]),
            Err(PartitionError::NoAnchors)
        ));
        assert!(matches!(
            label_sides(&s, &[("u0".into(), Side::Rights), ("u1".into(), Side::Control)]),
            Err(PartitionError::ContradictoryAnchors(_))
        ));
        assert!(matches!(
            label_sides(&s, &[("u0".into(), Side::Unknown)]),
            Err(PartitionError::UndeclaredAnchor(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let s = scores(&[(98, 100), (3, 100)]);
        let l = label_sides(&s, &[("u1".into(), Side::Control)]).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "user_id,polarity,side\nu0,0.9800,rights\nu1,0.0300,control\n"
        );
    }
}
