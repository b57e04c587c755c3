use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TextError, TokenDoc};
use crate::partition::Side;

/// Multinomial Naive Bayes over token frequencies, two classes
/// (index 0 = control, 1 = rights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub alpha: f64,
    pub priors: [f64; 2],
    pub counts: [HashMap<String, u64>; 2],
    pub totals: [u64; 2],
    pub vocabulary: BTreeSet<String>,
    /// Users per class after undersampling.
    pub class_sizes: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub side: Side,
    /// Posterior probability of the rights class.
    pub p_rights: f64,
}

fn class_index(s: Side) -> Option<usize> {
    match s {
        Side::Control => Some(0),
        Side::Rights => Some(1),
        Side::Unknown => None,
    }
}

impl NbModel {
    fn log_likelihood(&self, class: usize, token: &str) -> f64 {
        let c = self.counts[class].get(token).copied().unwrap_or(0) as f64;
        let denom = self.totals[class] as f64 + self.alpha * self.vocabulary.len() as f64;
        ((c + self.alpha) / denom).ln()
    }

    /// Posterior of the rights class, computed in log space. Tokens outside
    /// the vocabulary are ignored.
    pub fn p_rights(&self, doc: &TokenDoc) -> f64 {
        let mut score = [self.priors[0].ln(), self.priors[1].ln()];
        for t in doc.tokens.iter().filter(|t| self.vocabulary.contains(*t)) {
            score[0] += self.log_likelihood(0, t);
            score[1] += self.log_likelihood(1, t);
        }
        1.0 / (1.0 + (score[0] - score[1]).exp())
    }
}

/// Trains on labeled users after undersampling the larger class (seeded)
/// down to the size of the smaller one. Users labeled unknown are ignored;
/// labeled users without a document count as empty documents.
pub fn train_nb(
    docs: &BTreeMap<String, TokenDoc>,
    labels: &BTreeMap<String, Side>,
    alpha: f64,
    seed: u64,
) -> Result<NbModel, TextError> {
    let mut by_class: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for (id, s) in labels {
        if let Some(c) = class_index(*s) {
            by_class[c].push(id);
        }
    }
    if by_class[0].is_empty() {
        return Err(TextError::EmptyClass("control"));
    }
    if by_class[1].is_empty() {
        return Err(TextError::EmptyClass("rights"));
    }
    let keep = by_class[0].len().min(by_class[1].len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in by_class.iter_mut() {
        if members.len() > keep {
            members.shuffle(&mut rng);
            members.truncate(keep);
            members.sort_unstable();
        }
    }

    let mut counts: [HashMap<String, u64>; 2] = [HashMap::new(), HashMap::new()];
    let mut totals = [0u64; 2];
    let mut vocabulary = BTreeSet::new();
    for (c, members) in by_class.iter().enumerate() {
        for id in members {
            let Some(doc) = docs.get(*id) else { continue };
            for t in &doc.tokens {
                *counts[c].entry(t.clone()).or_insert(0) += 1;
                totals[c] += 1;
                vocabulary.insert(t.clone());
            }
        }
    }
    let n = (by_class[0].len() + by_class[1].len()) as f64;
    Ok(NbModel {
        alpha,
        priors: [by_class[0].len() as f64 / n, by_class[1].len() as f64 / n],
        counts,
        totals,
        vocabulary,
        class_sizes: [by_class[0].len(), by_class[1].len()],
    })
}

/// Labels rights when `P(rights) >= threshold`, control when
/// `P(rights) <= 1 - threshold`, unknown otherwise.
pub fn classify_nb(model: &NbModel, doc: &TokenDoc, threshold: f64) -> Result<Classification, TextError> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(TextError::BadThreshold(threshold));
    }
    let p = model.p_rights(doc);
    let side = if p >= threshold {
        Side::Rights
    } else if p <= 1.0 - threshold {
        Side::Control
    } else {
        Side::Unknown
    };
    Ok(Classification { side, p_rights: p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbCvReport {
    pub folds: usize,
    /// Argmax accuracy per fold.
    pub fold_accuracy: Vec<f64>,
    pub accuracy_mean: f64,
    /// Share of held-out users that clear the confidence threshold.
    pub labeled_fraction: f64,
    /// Error rate among held-out users that clear the threshold.
    pub labeled_error_rate: f64,
}

/// k-fold cross-validation of [`train_nb`]: seeded shuffle of the labeled
/// users, each fold held out once; held-out folds are not undersampled.
pub fn nb_cross_validate(
    docs: &BTreeMap<String, TokenDoc>,
    labels: &BTreeMap<String, Side>,
    k: usize,
    alpha: f64,
    threshold: f64,
    seed: u64,
) -> Result<NbCvReport, TextError> {
    let mut users: Vec<(&String, Side)> = labels
        .iter()
        .filter(|(_, s)| class_index(**s).is_some())
        .map(|(u, s)| (u, *s))
        .collect();
    if k < 2 || users.len() < k {
        return Err(TextError::TooFewForFolds(k, users.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let empty = TokenDoc::default();
    let mut fold_accuracy = Vec::with_capacity(k);
    let (mut labeled, mut labeled_wrong, mut seen) = (0usize, 0usize, 0usize);
    for f in 0..k {
        let train: BTreeMap<String, Side> = users
            .iter()
            .enumerate()
            .filter(|(i, _)| i % k != f)
            .map(|(_, (u, s))| ((*u).clone(), *s))
            .collect();
        let model = train_nb(docs, &train, alpha, seed.wrapping_add(f as u64))?;
        let mut correct = 0usize;
        let mut total = 0usize;
        for (_, (u, truth)) in users.iter().enumerate().filter(|(i, _)| i % k == f) {
            let doc = docs.get(*u).unwrap_or(&empty);
            let c = classify_nb(&model, doc, threshold)?;
            let argmax = if c.p_rights >= 0.5 { Side::Rights } else { Side::Control };
            correct += (argmax == *truth) as usize;
            total += 1;
            if c.side != Side::Unknown {
                labeled += 1;
                labeled_wrong += (c.side != *truth) as usize;
            }
        }
        seen += total;
        fold_accuracy.push(correct as f64 / total as f64);
    }
    Ok(NbCvReport {
        folds: k,
        accuracy_mean: fold_accuracy.iter().sum::<f64>() / k as f64,
        fold_accuracy,
        labeled_fraction: labeled as f64 / seen as f64,
        labeled_error_rate: if labeled == 0 { 0.0 } else { labeled_wrong as f64 / labeled as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, toks: &[&str]) -> TokenDoc {
        TokenDoc::new(id, toks.iter().map(|s| s.to_string()).collect())
    }

    fn setup(n_control: usize, n_rights: usize) -> (BTreeMap<String, TokenDoc>, BTreeMap<String, Side>) {
        let mut docs = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for i in 0..n_control {
            let id = format!("c{i:02}");
            docs.insert(id.clone(), doc(&id, &["x", "x"]));
            labels.insert(id, Side::Control);
        }
        for i in 0..n_rights {
            let id = format!("r{i:02}");
            docs.insert(id.clone(), doc(&id, &["y", "y"]));
            labels.insert(id, Side::Rights);
        }
        (docs, labels)
    }

    #[test]
    fn undersamples_majority() {
        let (docs, labels) = setup(10, 4);
        let m = train_nb(&docs, &labels, 1.0, 5).unwrap();
        assert_eq!(m.class_sizes, [4, 4]);
        assert_eq!(m.priors, [0.5, 0.5]);
        assert_eq!(m.totals, [8, 8]);
    }

    #[test]
    fn disjoint_vocabularies() {
        let (docs, labels) = setup(6, 6);
        let m = train_nb(&docs, &labels, 1.0, 0).unwrap();
        let p = m.p_rights(&doc("q", &["x"]));
        assert!(1.0 - p > 0.7);
        let c = classify_nb(&m, &doc("q", &vec!["x"; 20]), 0.99).unwrap();
        assert_eq!(c.side, Side::Control);
        assert!(c.p_rights <= 0.01);
        let c = classify_nb(&m, &doc("q", &vec!["y"; 20]), 0.99).unwrap();
        assert_eq!(c.side, Side::Rights);
    }

    #[test]
    fn hand_computed_posterior() {
        // Control: a a b (3 tokens), rights: b b (2 tokens). V = {a, b}, alpha = 1.
        // P(a|C) = 3/5, P(b|C) = 2/5, P(a|R) = 1/4, P(b|R) = 3/4.
        // Doc [a, b]: C ∝ 0.5*3/5*2/5 = 0.12, R ∝ 0.5*1/4*3/4 = 0.09375.
        let mut docs = BTreeMap::new();
        docs.insert("c".to_string(), doc("c", &["a", "a", "b"]));
        docs.insert("r".to_string(), doc("r", &["b", "b"]));
        let labels = BTreeMap::from([("c".to_string(), Side::Control), ("r".to_string(), Side::Rights)]);
        let m = train_nb(&docs, &labels, 1.0, 0).unwrap();
        let p = m.p_rights(&doc("q", &["a", "b"]));
        let expect = 0.09375 / (0.12 + 0.09375);
        assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
    }

    #[test]
    fn threshold_band() {
        let (docs, labels) = setup(3, 3);
        let m = train_nb(&docs, &labels, 1.0, 0).unwrap();
        // Empty doc: priors only.
        let c = classify_nb(&m, &TokenDoc::default(), 0.99).unwrap();
        assert_eq!((c.side, c.p_rights), (Side::Unknown, 0.5));
        assert!(classify_nb(&m, &TokenDoc::default(), 0.5).is_err());
        assert!(classify_nb(&m, &TokenDoc::default(), 1.2).is_err());
    }

    #[test]
    fn posterior_098_is_unknown() {
        // C = {x: 48}, R = {y: 48}, V = {x, y}, alpha = 1:
        // P(y|R) = 49/50, P(y|C) = 1/50, so a single y gives odds 49:1.
        let mut docs = BTreeMap::new();
        docs.insert("c".to_string(), doc("c", &vec!["x"; 48]));
        docs.insert("r".to_string(), doc("r", &vec!["y"; 48]));
        let labels = BTreeMap::from([("c".to_string(), Side::Control), ("r".to_string(), Side::Rights)]);
        let m = train_nb(&docs, &labels, 1.0, 0).unwrap();
        let c = classify_nb(&m, &doc("q", &["y"]), 0.99).unwrap();
        assert!((c.p_rights - 0.98).abs() < 1e-12, "{}", c.p_rights);
        assert_eq!(c.side, Side::Unknown);
        assert_eq!(classify_nb(&m, &doc("q", &["y"]), 0.95).unwrap().side, Side::Rights);
    }

    #[test]
    fn missing_class_errors() {
        let (docs, labels) = setup(3, 0);
        assert!(matches!(train_nb(&docs, &labels, 1.0, 0), Err(TextError::EmptyClass("rights"))));
    }

    #[test]
    fn cv_on_clean_data() {
        let (docs, labels) = setup(20, 15);
        let r = nb_cross_validate(&docs, &labels, 5, 1.0, 0.99, 3).unwrap();
        assert_eq!(r.fold_accuracy.len(), 5);
        assert_eq!(r.accuracy_mean, 1.0);
        assert_eq!(r.labeled_error_rate, 0.0);
    }
}
