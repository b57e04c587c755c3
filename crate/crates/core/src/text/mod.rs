//! Text processing: tokenization, Naive Bayes stance classification,
//! informative-prior log-odds, lexicon and category scoring, and entropy.

mod bayes;
mod lexicon;
mod logodds;

pub use bayes::{classify_nb, nb_cross_validate, train_nb, Classification, NbCvReport, NbModel};
pub use lexicon::{category_rates, lexicon_rate, sentiment_avg, CategoryDictionary, Lexicon};
pub use logodds::{log_odds_dirichlet, top_terms, LogOddsEntry, LogOddsResult, DEFAULT_PRIOR_SCALE};

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("class {0} has no training users")]
    EmptyClass(&'static str),
    #[error("threshold {0} must lie in (0.5, 1]")]
    BadThreshold(f64),
    #[error("token {0:?} is missing from the background counts")]
    NotInBackground(String),
    #[error("corpus totals must be positive")]
    EmptyCorpus,
    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },
    #[error("category dictionary line {line}: {msg}")]
    Dictionary { line: usize, msg: String },
    #[error("{0} folds requested for {1} users")]
    TooFewForFolds(usize, usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Lowercase stopword set.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn none() -> Self {
        Self::default()
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::from_lines(DEFAULT_STOPWORDS.lines())
    }

    pub fn default_list() -> &'static str {
        DEFAULT_STOPWORDS
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self, TextError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        Ok(Self::from_lines(lines.iter().map(String::as_str)))
    }

    fn from_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Self {
        Stopwords(
            lines
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercases and splits on anything that is not alphanumeric. Apostrophes
/// between alphanumerics stay inside the token (normalized to `'`), so
/// `#` and `@` prefixes simply fall away. Stopwords are dropped.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut flush = |cur: &mut String| {
        if !cur.is_empty() && !stopwords.contains(cur) {
            tokens.push(std::mem::take(cur));
        }
        cur.clear();
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if is_apostrophe(c) && !cur.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
            cur.push('\'');
        } else {
            flush(&mut cur);
        }
    }
    flush(&mut cur);
    tokens
}

/// Tokens of one user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenDoc {
    pub user_id: String,
    pub tokens: Vec<String>,
}

impl TokenDoc {
    pub fn new(user_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenDoc {
            user_id: user_id.into(),
            tokens,
        }
    }

    /// Concatenates the tokens of several texts.
    pub fn from_texts<'a>(user_id: &str, texts: impl IntoIterator<Item = &'a str>, stopwords: &Stopwords) -> Self {
        let tokens = texts.into_iter().flat_map(|t| tokenize(t, stopwords)).collect();
        TokenDoc::new(user_id, tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<&str, u64> {
        let mut m = BTreeMap::new();
        for t in &self.tokens {
            *m.entry(t.as_str()).or_insert(0) += 1;
        }
        m
    }
}

/// Base-2 Shannon entropy of the normalized counts; 0 for an all-zero input.
/// Counts are sorted before summation so the value does not depend on input
/// order.
pub fn shannon_entropy<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let mut c: Vec<u64> = counts.into_iter().filter(|&x| x > 0).collect();
    c.sort_unstable();
    let total: u64 = c.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = c
        .iter()
        .map(|&x| {
            let p = x as f64 / t;
            -p * p.log2()
        })
        .sum();
    // -p log p sums of a single full-mass item are exactly 0; avoid -0.0.
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_tokenization() {
        assert_eq!(tokenize("Guns KILL #NeverAgain", &Stopwords::none()), ["guns", "kill", "neveragain"]);
        let sw: Stopwords = ["the"].into_iter().collect();
        assert!(tokenize("the the the", &sw).is_empty());
        assert!(tokenize("", &sw).is_empty());
    }

    #[test]
    fn mixed_punctuation_matches_hand_tokenization() {
        let text = "Don't shoot!! @NRA\u{2019}s #2A rally: 100% https://t.co/xY ... 'quoted' ÉCOLE";
        let expect = [
            "don't", "shoot", "nra's", "2a", "rally", "100", "https", "t", "co", "xy", "quoted", "école",
        ];
        assert_eq!(tokenize(text, &Stopwords::none()), expect);
    }

    #[test]
    fn default_stopwords_load() {
        let sw = Stopwords::english();
        assert!(sw.contains("the"));
        assert!(sw.contains("and"));
        assert!(!sw.contains("gun"));
        assert_eq!(tokenize("The guns and the law", &sw), ["guns", "law"]);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(shannon_entropy([2, 2]), 1.0);
        assert_eq!(shannon_entropy([4]), 0.0);
        assert_eq!(shannon_entropy([1, 1, 1, 1]), 2.0);
        assert_eq!(shannon_entropy([0, 0]), 0.0);
        assert_eq!(shannon_entropy(Vec::<u64>::new()), 0.0);
    }
}
