use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::StatsError;

/// Relative size below which a column's component orthogonal to the
/// preceding columns counts as zero.
const RANK_TOL: f64 = 1e-9;

/// Ordinary least squares fit with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Standard errors, intercept first.
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_stat: f64,
    pub f_pvalue: f64,
    pub n: usize,
    pub p: usize,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Upper-tail probability of the F distribution through the regularized
/// incomplete beta function.
fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Least squares of `y` on the columns of `x` (row-major) plus an
/// intercept, solved by Householder QR. A column lying in the span of the
/// intercept and the columns before it makes the fit fail with the names of
/// all such columns.
pub fn ols(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<OlsFit, StatsError> {
    let n = y.len();
    if x.len() != n {
        return Err(StatsError::LengthMismatch(x.len(), n));
    }
    let p = names.len();
    if x.iter().any(|r| r.len() != p) {
        return Err(StatsError::Invalid(format!("every row must have {p} values")));
    }
    if n < p + 2 {
        return Err(StatsError::TooFew { need: p + 2, got: n });
    }
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let col_norms: Vec<f64> = (0..=p).map(|j| a.column(j).norm()).collect();
    let qr = a.qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..=p)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * col_norms[j].max(f64::MIN_POSITIVE))
        .map(|j| if j == 0 { "(intercept)".to_string() } else { names[j - 1].clone() })
        .collect();
    if !dependent.is_empty() {
        return Err(StatsError::RankDeficient(dependent));
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p + 1).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| StatsError::RankDeficient(names.to_vec()))?;

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - beta[0] - (0..p).map(|j| beta[j + 1] * x[i][j]).sum::<f64>())
        .collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df_res = (n - p - 1) as f64;
    let r2 = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_res;
    let (f_stat, f_pvalue) = if p == 0 {
        (f64::NAN, f64::NAN)
    } else if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / p as f64) / ((1.0 - r2) / df_res);
        (f, f_sf(f, p as f64, df_res))
    };
    let sigma2 = rss / df_res;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p + 1, p + 1))
        .ok_or_else(|| StatsError::RankDeficient(names.to_vec()))?;
    let std_errors = (0..=p)
        .map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt())
        .collect();
    Ok(OlsFit {
        names: names.to_vec(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        std_errors,
        r2,
        adj_r2,
        f_stat,
        f_pvalue,
        n,
        p,
        residuals,
    })
}

/// Variance inflation factor of every column: `1 / (1 - R^2_j)` with
/// `R^2_j` from regressing column `j` on the others (with intercept).
/// Exact collinearity gives infinity. Input is column-major.
pub fn vif(columns: &[Vec<f64>]) -> Result<Vec<f64>, StatsError> {
    let k = columns.len();
    if k < 2 {
        return Err(StatsError::TooFew { need: 2, got: k });
    }
    let n = columns[0].len();
    (0..k)
        .map(|j| {
            let others: Vec<usize> = (0..k).filter(|&i| i != j).collect();
            let rows: Vec<Vec<f64>> = (0..n).map(|r| others.iter().map(|&i| columns[i][r]).collect()).collect();
            let names: Vec<String> = others.iter().map(|i| i.to_string()).collect();
            match ols(&rows, &columns[j], &names) {
                Ok(fit) if fit.r2 < 1.0 => Ok(1.0 / (1.0 - fit.r2)),
                Ok(_) | Err(StatsError::RankDeficient(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    /// Surviving columns with their final VIF, sorted by name.
    pub kept: Vec<(String, f64)>,
    /// Removed columns in removal order, with the VIF that removed them.
    pub removed: Vec<(String, f64)>,
}

/// Removes the column with the largest VIF while any VIF is at least
/// `max_vif`. Equal VIFs (within 1e-9 relative) go to the alphabetically
/// first name, so the outcome does not depend on column order.
pub fn vif_prune(columns: &[Vec<f64>], names: &[String], max_vif: f64) -> Result<VifReport, StatsError> {
    if columns.len() != names.len() {
        return Err(StatsError::LengthMismatch(columns.len(), names.len()));
    }
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut cols: Vec<Vec<f64>> = order.iter().map(|&i| columns[i].clone()).collect();
    let mut live: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
    let mut removed = Vec::new();
    loop {
        if live.len() < 2 {
            let kept = live.into_iter().map(|n| (n, 1.0)).collect();
            return Ok(VifReport { kept, removed });
        }
        let v = vif(&cols)?;
        let worst = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst < max_vif {
            return Ok(VifReport {
                kept: live.into_iter().zip(v).collect(),
                removed,
            });
        }
        let close = |x: f64| x == worst || (worst.is_finite() && (worst - x).abs() <= 1e-9 * worst.abs());
        // Columns are kept in name order, so the first match is alphabetical.
        let j = v.iter().position(|&x| close(x)).expect("maximum exists");
        removed.push((live.remove(j), v[j]));
        cols.remove(j);
    }
}
