//! Feature selection, regression, classifiers and evaluation.

mod classify;
mod cv;
mod ols;

pub use classify::{
    logistic_loss_grad, train, ClassifierKind, ClassifierSpec, DecisionTree, LinearModel, Model, RandomForest,
};
pub use cv::{
    ablation, fold_assignment, kfold_cv, AblationMode, AblationReport, AblationRow, CvResult, FoldResult, MetricSummary, OlsRow,
};
pub use ols::{ols, vif, vif_prune, OlsFit, VifReport};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} is constant")]
    Constant(String),
    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("both classes must be present")]
    SingleClass,
    #[error("baseline must be below 1, got {0}")]
    BadBaseline(f64),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::Constant("x".into()));
    }
    if syy == 0.0 {
        return Err(StatsError::Constant("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlations of complete, non-constant columns; the
/// diagonal is exactly 1.
pub fn correlation_matrix(m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, StatsError> {
    let cols = m.dense_columns()?;
    let names: Vec<&str> = m.names().collect();
    let k = cols.len();
    let mut r = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = pearson(&cols[i], &cols[j]).map_err(|e| match e {
                StatsError::Constant(which) => {
                    StatsError::Constant(if which == "x" { names[i] } else { names[j] }.to_string())
                }
                other => other,
            })?;
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(r)
}

/// Outcome of correlation screening.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// `(column, r)` for kept columns, in matrix order.
    pub kept: Vec<(String, f64)>,
    /// `(column, reason)` for dropped columns.
    pub dropped: Vec<(String, String)>,
}

/// Keeps columns whose correlation with `target` has magnitude at least
/// `min_abs`, computed over the rows where the column is present.
pub fn select_by_correlation(m: &FeatureMatrix, target: &[f64], min_abs: f64) -> Result<Selection, StatsError> {
    if target.len() != m.n_rows() {
        return Err(StatsError::LengthMismatch(target.len(), m.n_rows()));
    }
    let mut out = Selection::default();
    for c in m.columns() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = c
            .values
            .iter()
            .zip(target)
            .filter_map(|(v, t)| v.map(|v| (v, *t)))
            .unzip();
        match pearson(&xs, &ys) {
            Ok(r) if r.abs() >= min_abs => out.kept.push((c.name.clone(), r)),
            Ok(r) => out.dropped.push((c.name.clone(), format!("|r| = {:.4} < {min_abs}", r.abs()))),
            Err(StatsError::Constant(_)) => out.dropped.push((c.name.clone(), "constant".into())),
            Err(StatsError::TooFew { .. }) => out.dropped.push((c.name.clone(), "fewer than 2 values".into())),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Balanced class weights `n / (2 n_j)` for (negative, positive).
pub fn class_weights(y: &[bool]) -> Result<[f64; 2], StatsError> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let n = y.len() as f64;
    Ok([n / (2.0 * neg as f64), n / (2.0 * pos as f64)])
}

/// Binary classification metrics with the positive class as reference.
/// Ratios with a zero denominator are reported as 0 and flagged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

pub fn metrics(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Metrics, StatsError> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let ratio = |a: usize, b: usize| if b == 0 { (0.0, true) } else { (a as f64 / b as f64, false) };
    let (precision, pu) = ratio(tp, tp + fp);
    let (recall, ru) = ratio(tp, tp + fn_);
    let (f1, fu) = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        precision_undefined: pu,
        recall_undefined: ru,
        f1_undefined: fu,
    })
}

/// Metrics of predictions against truth.
pub fn evaluate(truth: &[bool], pred: &[bool]) -> Result<Metrics, StatsError> {
    if truth.len() != pred.len() {
        return Err(StatsError::LengthMismatch(truth.len(), pred.len()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    metrics(tp, fp, fn_, tn)
}

/// Cohen's kappa from an observed accuracy and a chance baseline.
pub fn cohens_kappa(accuracy: f64, baseline: f64) -> Result<f64, StatsError> {
    if baseline >= 1.0 || baseline.is_nan() {
        return Err(StatsError::BadBaseline(baseline));
    }
    Ok((accuracy - baseline) / (1.0 - baseline))
}

/// Draws `size` members from `pool` (id, stratum) so that strata follow
/// `shares` (any non-negative weights per stratum). Seats are allocated by
/// largest remainder; strata that run short hand their seats to the others.
/// Within a stratum members are drawn by seeded shuffle. The result is
/// sorted.
pub fn stratified_sample(
    pool: &[(String, String)],
    shares: &BTreeMap<String, f64>,
    size: usize,
    seed: u64,
) -> Result<Vec<String>, StatsError> {
    let mut by_stratum: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, s) in pool {
        by_stratum.entry(s.as_str()).or_default().push(id.as_str());
    }
    let available: usize = by_stratum
        .iter()
        .filter(|(s, _)| shares.get(**s).is_some_and(|w| *w > 0.0))
        .map(|(_, v)| v.len())
        .sum();
    if available < size {
        return Err(StatsError::TooFew { need: size, got: available });
    }
    let mut seats: BTreeMap<&str, usize> = BTreeMap::new();
    let mut remaining = size;
    loop {
        let open: Vec<(&str, f64)> = by_stratum
            .iter()
            .filter_map(|(s, v)| {
                let w = shares.get(*s).copied().unwrap_or(0.0);
                (w > 0.0 && seats.get(s).copied().unwrap_or(0) < v.len()).then_some((*s, w))
            })
            .collect();
        if remaining == 0 || open.is_empty() {
            break;
        }
        let total: f64 = open.iter().map(|o| o.1).sum();
        let quotas: Vec<(&str, f64)> = open.iter().map(|(s, w)| (*s, remaining as f64 * w / total)).collect();
        let mut alloc: Vec<(&str, usize, f64)> = quotas.iter().map(|(s, q)| (*s, q.floor() as usize, q - q.floor())).collect();
        let mut left = remaining - alloc.iter().map(|a| a.1).sum::<usize>();
        let mut order: Vec<usize> = (0..alloc.len()).collect();
        order.sort_by(|&a, &b| alloc[b].2.total_cmp(&alloc[a].2).then(alloc[a].0.cmp(alloc[b].0)));
        for &i in order.iter().cycle().take(alloc.len() * 2) {
            if left == 0 {
                break;
            }
            alloc[i].1 += 1;
            left -= 1;
        }
        for (s, k, _) in alloc {
            let cap = by_stratum[s].len();
            let cur = seats.entry(s).or_insert(0);
            let add = k.min(cap - *cur);
            *cur += add;
            remaining -= add;
        }
    }
    let mut out = Vec::with_capacity(size);
    for (i, (s, members)) in by_stratum.iter().enumerate() {
        let k = seats.get(s).copied().unwrap_or(0);
        if k == 0 {
            continue;
        }
        let mut m = members.clone();
        m.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        m.shuffle(&mut rng);
        out.extend(m[..k].iter().map(|s| s.to_string()));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn class_weight_values() {
        let mut y = vec![true; 631];
        y.extend(vec![false; 575]);
        let w = class_weights(&y).unwrap();
        assert_eq!(format!("{:.4}", w[1]), "0.9556");
        assert_eq!(format!("{:.4}", w[0]), "1.0487");
        let mut y = vec![false; 90];
        y.extend(vec![true; 10]);
        let w = class_weights(&y).unwrap();
        assert_eq!(format!("{:.4} {:.4}", w[0], w[1]), "0.5556 5.0000");
        assert_eq!(class_weights(&[true; 4]).unwrap_err().to_string(), StatsError::SingleClass.to_string());
    }

    #[test]
    fn metric_values() {
        let m = metrics(3, 1, 1, 5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.75, 0.75, 0.75));
        assert_eq!(m.accuracy, 0.8);
        let m = metrics(0, 0, 4, 6).unwrap();
        assert!(m.precision_undefined && m.precision == 0.0);
        let m = metrics(5, 0, 0, 5).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn kappa_values() {
        assert_eq!(format!("{:.3}", cohens_kappa(0.700, 0.526).unwrap()), "0.367");
        assert_eq!(cohens_kappa(0.6, 0.6).unwrap(), 0.0);
        assert_eq!(cohens_kappa(1.0, 0.3).unwrap(), 1.0);
        assert!(cohens_kappa(0.9, 1.0).is_err());
    }

    #[test]
    fn stratified_allocation() {
        let mut pool = Vec::new();
        for i in 0..50 {
            pool.push((format!("a{i:02}"), "NY".to_string()));
        }
        for i in 0..3 {
            pool.push((format!("b{i:02}"), "WY".to_string()));
        }
        for i in 0..50 {
            pool.push((format!("c{i:02}"), "TX".to_string()));
        }
        // Shares 5:3:2 of 20 -> NY 10, WY 6 (only 3 available), TX 4; WY's
        // shortfall of 3 is reallocated 5:2 over NY and TX.
        let shares: BTreeMap<String, f64> = [("NY", 5.0), ("WY", 3.0), ("TX", 2.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let s = stratified_sample(&pool, &shares, 20, 1).unwrap();
        assert_eq!(s.len(), 20);
        let count = |p: char| s.iter().filter(|x| x.starts_with(p)).count();
        assert_eq!(count('b'), 3);
        assert_eq!(count('a') + count('c'), 17);
        assert_eq!(count('a'), 12);
        assert_eq!(s, stratified_sample(&pool, &shares, 20, 1).unwrap());
        assert!(stratified_sample(&pool, &shares, 200, 1).is_err());
    }
}
