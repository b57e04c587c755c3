use std::collections::BTreeMap;
use std::io::{BufRead, Read};

use super::{TextError, TokenDoc};

/// A word list, optionally with a real score per term (e.g. a hate-word list
/// or a happiness lexicon). Terms are lowercase and unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    terms: BTreeMap<String, Option<f64>>,
}

impl Lexicon {
    pub fn from_terms<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> Self {
        Lexicon {
            terms: terms.into_iter().map(|t| (t.as_ref().trim().to_lowercase(), None)).collect(),
        }
    }

    pub fn from_scores<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Lexicon {
            terms: pairs
                .into_iter()
                .map(|(t, s)| (t.as_ref().trim().to_lowercase(), Some(s)))
                .collect(),
        }
    }

    /// Reads `term[,score]` rows. A first row whose score column is not a
    /// number, or whose term is literally `term`/`word`, is taken as a header.
    /// Repeated terms keep the last row.
    pub fn from_reader<R: Read>(r: R) -> Result<Self, TextError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut terms = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            let term = rec.get(0).unwrap_or("").to_lowercase();
            let score_field = rec.get(1).filter(|s| !s.is_empty());
            if i == 0 {
                let named = term == "term" || term == "word";
                let non_numeric = score_field.is_some_and(|s| s.parse::<f64>().is_err());
                if named || non_numeric {
                    continue;
                }
            }
            if term.is_empty() {
                return Err(TextError::Lexicon { line, msg: "empty term".into() });
            }
            let score = match score_field {
                None => None,
                Some(s) => Some(s.parse::<f64>().map_err(|_| TextError::Lexicon {
                    line,
                    msg: format!("score {s:?} is not a number"),
                })?),
            };
            if terms.insert(term.clone(), score).is_some() {
                log::warn!("lexicon line {line}: duplicate term {term:?}, keeping the last entry");
            }
        }
        Ok(Lexicon { terms })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.terms.contains_key(token)
    }

    pub fn score(&self, token: &str) -> Option<f64> {
        self.terms.get(token).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Share of the document's tokens found in the lexicon; 0 for an empty doc.
pub fn lexicon_rate(doc: &TokenDoc, lex: &Lexicon) -> f64 {
    if doc.tokens.is_empty() {
        return 0.0;
    }
    let hits = doc.tokens.iter().filter(|t| lex.contains(t)).count();
    hits as f64 / doc.tokens.len() as f64
}

/// Mean score over tokens that carry a score in the lexicon (each
/// occurrence counts). `None` when nothing matches.
pub fn sentiment_avg(doc: &TokenDoc, lex: &Lexicon) -> Option<f64> {
    let (sum, n) = doc
        .tokens
        .iter()
        .filter_map(|t| lex.score(t))
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pattern {
    Exact(String),
    Prefix(String),
}

impl Pattern {
    fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Exact(w) => token == w,
            Pattern::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

/// LIWC-style dictionary: named categories, each a list of literal words
/// or prefix patterns ending in `*`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryDictionary {
    categories: Vec<(String, Vec<Pattern>)>,
}

impl CategoryDictionary {
    /// Parses the sectioned format:
    ///
    /// ```text
    /// [posemo]
    /// happy
    /// glad*
    /// ```
    ///
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self, TextError> {
        let mut dict = CategoryDictionary::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let err = |msg: String| TextError::Dictionary { line: line_no, msg };
            if let Some(name) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                dict.add_category(name).map_err(err)?;
                continue;
            }
            let Some((_, patterns)) = dict.categories.last_mut() else {
                return Err(err(format!("pattern {text:?} before any [category] header")));
            };
            patterns.push(parse_pattern(text).map_err(err)?);
        }
        Ok(dict)
    }

    fn add_category(&mut self, name: &str) -> Result<(), String> {
        let name = name.trim();
        if name.is_empty() {
            return Err("empty category name".into());
        }
        if self.categories.iter().any(|(n, _)| n == name) {
            return Err(format!("duplicate category {name:?}"));
        }
        self.categories.push((name.to_string(), Vec::new()));
        Ok(())
    }

    /// Builds a dictionary from `(category, patterns)` pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, &[&str])]) -> Result<Self, TextError> {
        let mut dict = CategoryDictionary::default();
        for (name, pats) in pairs {
            let err = |msg: String| TextError::Dictionary { line: 0, msg };
            dict.add_category(name.as_ref()).map_err(err)?;
            let list = &mut dict.categories.last_mut().expect("just pushed").1;
            for p in *pats {
                list.push(parse_pattern(p).map_err(err)?);
            }
        }
        Ok(dict)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

fn parse_pattern(text: &str) -> Result<Pattern, String> {
    let text = text.trim().to_lowercase();
    match text.strip_suffix('*') {
        Some("") => Err("bare '*' pattern".into()),
        Some(p) => Ok(Pattern::Prefix(p.to_string())),
        None if text.is_empty() => Err("empty pattern".into()),
        None => Ok(Pattern::Exact(text)),
    }
}

/// Per category, the fraction of tokens matching any of its patterns, in
/// dictionary order. One token can count toward several categories.
pub fn category_rates(doc: &TokenDoc, dict: &CategoryDictionary) -> Vec<(String, f64)> {
    let n = doc.tokens.len();
    dict.categories
        .iter()
        .map(|(name, pats)| {
            let rate = if n == 0 {
                0.0
            } else {
                let hits = doc.tokens.iter().filter(|t| pats.iter().any(|p| p.matches(t))).count();
                hits as f64 / n as f64
            };
            (name.clone(), rate)
        })
        .collect()
}
