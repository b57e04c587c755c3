use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, ols, train, ClassifierSpec, Metrics, StatsError};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricSummary {
    fn of(ms: &[Metrics], f: impl Fn(&[f64]) -> f64) -> Self {
        let col = |g: fn(&Metrics) -> f64| f(&ms.iter().map(g).collect::<Vec<_>>());
        MetricSummary {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
        }
    }
}

/// Per-fold metrics with their mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
    pub sd: MetricSummary,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds; the first
/// `n % k` folds hold one extra row.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let len = base + (f < extra) as usize;
        let mut fold = idx[at..at + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        at += len;
    }
    out
}

/// k-fold cross-validation; the positive class is `true`.
pub fn kfold_cv(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[bool], k: usize, seed: u64) -> Result<CvResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if k < 2 || x.len() < k {
        return Err(StatsError::TooFew {
            need: k.max(2),
            got: x.len(),
        });
    }
    let folds = fold_assignment(x.len(), k, seed);
    let results: Vec<FoldResult> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut is_test = vec![false; x.len()];
            test.iter().for_each(|&i| is_test[i] = true);
            let (tx, ty): (Vec<Vec<f64>>, Vec<bool>) = (0..x.len())
                .filter(|&i| !is_test[i])
                .map(|i| (x[i].clone(), y[i]))
                .unzip();
            let model = train(spec, &tx, &ty)?;
            let pred: Vec<bool> = test.iter().map(|&i| model.predict(&x[i])).collect();
            let truth: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            Ok(FoldResult {
                fold: f,
                test_rows: test.clone(),
                metrics: evaluate(&truth, &pred)?,
            })
        })
        .collect::<Result<_, StatsError>>()?;
    let ms: Vec<Metrics> = results.iter().map(|r| r.metrics).collect();
    Ok(CvResult {
        k,
        mean: MetricSummary::of(&ms, mean),
        sd: MetricSummary::of(&ms, sd),
        folds: results,
    })
}

/// In-sample OLS summary of one ablation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsRow {
    pub r2: f64,
    pub adj_r2: f64,
    pub f_stat: f64,
    pub f_pvalue: f64,
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `full`, `<group> only`, `without <group>` or the concatenated group
    /// names of a cumulative step.
    pub label: String,
    pub kind: String,
    pub columns: Vec<String>,
    pub cv: Option<CvResult>,
    pub ols: Option<OlsRow>,
    /// Why the row could not be evaluated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

pub enum AblationMode<'a> {
    Cv {
        spec: &'a ClassifierSpec,
        y: &'a [bool],
        k: usize,
        seed: u64,
    },
    Ols {
        y: &'a [f64],
    },
}

/// Evaluates the full column set, each group alone, each group left out,
/// and each cumulative step (a list of group names). `m` must be complete.
/// Rows that cannot be fitted carry an error message instead of results.
pub fn ablation(
    groups: &[(String, Vec<String>)],
    cumulative: &[Vec<String>],
    mode: &AblationMode<'_>,
    m: &FeatureMatrix,
) -> Result<AblationReport, StatsError> {
    let all: Vec<String> = groups.iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    let mut plan: Vec<(String, String, Vec<String>)> = vec![("full".into(), "full".into(), all.clone())];
    for (name, cols) in groups {
        plan.push((format!("{name} only"), "only".into(), cols.clone()));
    }
    for (name, cols) in groups {
        let rest = all.iter().filter(|c| !cols.contains(c)).cloned().collect();
        plan.push((format!("without {name}"), "without".into(), rest));
    }
    for step in cumulative {
        let mut cols = Vec::new();
        for g in step {
            let (_, gc) = groups
                .iter()
                .find(|(n, _)| n == g)
                .ok_or_else(|| StatsError::Invalid(format!("cumulative step names unknown group {g:?}")))?;
            cols.extend(gc.iter().cloned());
        }
        plan.push((step.concat(), "cumulative".into(), cols));
    }
    let rows = plan
        .into_par_iter()
        .map(|(label, kind, columns)| {
            let mut row = AblationRow {
                label,
                kind,
                columns,
                cv: None,
                ols: None,
                error: None,
            };
            if row.columns.is_empty() {
                row.error = Some("no columns".into());
                return Ok(row);
            }
            let names: Vec<&str> = row.columns.iter().map(String::as_str).collect();
            let x = m.select(&names)?.dense_rows()?;
            let outcome = match mode {
                AblationMode::Cv { spec, y, k, seed } => kfold_cv(spec, &x, y, *k, *seed).map(|r| row.cv = Some(r)),
                AblationMode::Ols { y } => ols(&x, y, &row.columns).map(|f| {
                    row.ols = Some(OlsRow {
                        r2: f.r2,
                        adj_r2: f.adj_r2,
                        f_stat: f.f_stat,
                        f_pvalue: f.f_pvalue,
                        n: f.n,
                        p: f.p,
                    })
                }),
            };
            if let Err(e) = outcome {
                row.error = Some(e.to_string());
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(AblationReport { rows })
}
