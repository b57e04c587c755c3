use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::TextError;

/// Prior strength as a fraction of the background token total.
pub const DEFAULT_PRIOR_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsEntry {
    pub token: String,
    pub count_i: u64,
    pub count_j: u64,
    /// Log-odds of the token in corpus i minus corpus j.
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsResult {
    /// Sorted by token.
    pub entries: Vec<LogOddsEntry>,
    pub alpha0: f64,
}

impl LogOddsResult {
    pub fn get(&self, token: &str) -> Option<&LogOddsEntry> {
        self.entries
            .binary_search_by(|e| e.token.as_str().cmp(token))
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// Log-odds ratio with an informative Dirichlet prior. The prior puts
/// `alpha_w = prior_scale * background[w]` on each token, so
/// `alpha0 = prior_scale * sum(background)`:
///
/// ```text
/// delta_w = ln((y_iw + a_w) / (n_i + a0 - y_iw - a_w)) - ln((y_jw + a_w) / (n_j + a0 - y_jw - a_w))
/// var_w  ~= 1 / (y_iw + a_w) + 1 / (y_jw + a_w)
/// z_w     = delta_w / sqrt(var_w)
/// ```
///
/// Every token of either corpus must have a positive background count.
pub fn log_odds_dirichlet(
    counts_i: &HashMap<String, u64>,
    counts_j: &HashMap<String, u64>,
    background: &HashMap<String, u64>,
    prior_scale: f64,
) -> Result<LogOddsResult, TextError> {
    let n_i: u64 = counts_i.values().sum();
    let n_j: u64 = counts_j.values().sum();
    let bg_total: u64 = background.values().sum();
    if n_i == 0 || n_j == 0 || bg_total == 0 {
        return Err(TextError::EmptyCorpus);
    }
    let alpha0 = prior_scale * bg_total as f64;
    let vocab: BTreeSet<&String> = counts_i.keys().chain(counts_j.keys()).collect();
    let mut entries = Vec::with_capacity(vocab.len());
    for token in vocab {
        let bg = background.get(token).copied().unwrap_or(0);
        if bg == 0 {
            return Err(TextError::NotInBackground(token.clone()));
        }
        let a_w = prior_scale * bg as f64;
        let y_i = counts_i.get(token).copied().unwrap_or(0);
        let y_j = counts_j.get(token).copied().unwrap_or(0);
        let log_odds = |y: u64, n: u64| {
            let y = y as f64;
            let rest = n as f64 + alpha0 - y - a_w;
            ((y + a_w) / rest).ln()
        };
        let delta = log_odds(y_i, n_i) - log_odds(y_j, n_j);
        let variance = 1.0 / (y_i as f64 + a_w) + 1.0 / (y_j as f64 + a_w);
        if !delta.is_finite() {
            // Only possible when one token carries the whole background.
            return Err(TextError::EmptyCorpus);
        }
        entries.push(LogOddsEntry {
            token: token.clone(),
            count_i: y_i,
            count_j: y_j,
            delta,
            variance,
            z: delta / variance.sqrt(),
        });
    }
    Ok(LogOddsResult { entries, alpha0 })
}

/// Tokens most over-represented in corpus i (`toward_i`) or corpus j,
/// ranked by |z|. Only tokens with combined count `>= min_count` and
/// `|z| >= min_z` in the requested direction qualify.
pub fn top_terms(result: &LogOddsResult, toward_i: bool, min_count: u64, min_z: f64, limit: usize) -> Vec<&LogOddsEntry> {
    let mut picked: Vec<&LogOddsEntry> = result
        .entries
        .iter()
        .filter(|e| e.count_i + e.count_j >= min_count)
        .filter(|e| if toward_i { e.z >= min_z } else { -e.z >= min_z })
        .collect();
    picked.sort_by(|a, b| {
        b.z.abs()
            .partial_cmp(&a.z.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.token.cmp(&b.token))
    });
    picked.truncate(limit);
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(&str, u64)]) -> HashMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn identical_corpora_give_zero() {
        let c = m(&[("a", 5), ("b", 3), ("c", 1)]);
        let bg = m(&[("a", 50), ("b", 20), ("c", 30)]);
        let r = log_odds_dirichlet(&c, &c, &bg, DEFAULT_PRIOR_SCALE).unwrap();
        assert!(r.entries.iter().all(|e| e.delta == 0.0 && e.z == 0.0));
        assert!(top_terms(&r, true, 0, 1.96, 10).is_empty());
    }

    #[test]
    fn exclusive_token_is_positive() {
        let ci = m(&[("a", 5), ("only", 4)]);
        let cj = m(&[("a", 5)]);
        let bg = m(&[("a", 10), ("only", 4)]);
        let r = log_odds_dirichlet(&ci, &cj, &bg, DEFAULT_PRIOR_SCALE).unwrap();
        assert!(r.get("only").unwrap().delta > 0.0);
        assert!(r.entries.iter().all(|e| e.variance > 0.0));
    }

    #[test]
    fn three_token_case_matches_direct_evaluation() {
        let ci = m(&[("gun", 10), ("law", 3), ("nra", 0)]);
        let cj = m(&[("gun", 4), ("law", 1), ("nra", 9)]);
        let bg = m(&[("gun", 400), ("law", 100), ("nra", 500)]);
        let r = log_odds_dirichlet(&ci, &cj, &bg, DEFAULT_PRIOR_SCALE).unwrap();
        // alpha0 = 10; alpha = 4, 1, 5; n_i = 13, n_j = 14.
        let expect = [
            ("gun", (14.0f64 / 9.0).ln() - (8.0f64 / 16.0).ln(), 1.0 / 14.0 + 1.0 / 8.0),
            ("law", (4.0f64 / 19.0).ln() - (2.0f64 / 22.0).ln(), 1.0 / 4.0 + 1.0 / 2.0),
            ("nra", (5.0f64 / 18.0).ln() - (14.0f64 / 10.0).ln(), 1.0 / 5.0 + 1.0 / 14.0),
        ];
        for (tok, delta, var) in expect {
            let e = r.get(tok).unwrap();
            assert!((e.delta - delta).abs() < 1e-12, "{tok}");
            assert!((e.variance - var).abs() < 1e-12, "{tok}");
            assert!((e.z - delta / var.sqrt()).abs() < 1e-12, "{tok}");
        }
    }

    #[test]
    fn errors() {
        let c = m(&[("a", 1)]);
        assert!(matches!(
            log_odds_dirichlet(&c, &c, &m(&[("b", 1)]), 0.01),
            Err(TextError::NotInBackground(_))
        ));
        assert!(log_odds_dirichlet(&m(&[]), &c, &m(&[("a", 1)]), 0.01).is_err());
    }
}
