//! Model-ready feature tables.
//!
//! A [`FeatureMatrix`] is a keyed table of optional reals where every column
//! carries a [`Provenance`] tag naming the feature family it belongs to.
//! State-level rows come from [`state_network_features`] and
//! [`state_content_behavior_features`]; user-level rows from
//! [`user_network_features`] and [`user_content_behavior_features`]. External
//! statistical tables are attached with [`join_external`].

mod network;
mod user;

pub use network::{
    assortativity, average_clustering, gini, local_clustering, pagerank, state_network_features, user_network_features,
    PageRankOptions, UserNetworkFeatures,
};
pub use user::{
    state_content_behavior_features, user_content_behavior_features, ContentResources, UserFeatureRow, Window,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("column {name:?} has {got} values, matrix has {expected} rows")]
    LengthMismatch { name: String, expected: usize, got: usize },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("row {0:?} has no join key")]
    UnmappedRow(String),
    #[error("column {column:?} has a missing value in row {row:?}")]
    Missing { column: String, row: String },
    #[error("table row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Feature family of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Network,
    Content,
    Behavior,
    Demographic,
    Economic,
    Health,
    Politics,
    Liwc,
}

impl Provenance {
    pub const ALL: [Provenance; 8] = [
        Provenance::Network,
        Provenance::Content,
        Provenance::Behavior,
        Provenance::Demographic,
        Provenance::Economic,
        Provenance::Health,
        Provenance::Politics,
        Provenance::Liwc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Network => "network",
            Provenance::Content => "content",
            Provenance::Behavior => "behavior",
            Provenance::Demographic => "demographic",
            Provenance::Economic => "economic",
            Provenance::Health => "health",
            Provenance::Politics => "politics",
            Provenance::Liwc => "liwc",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown provenance {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub provenance: Provenance,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Rectangular keyed table of optional reals with unique column names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    keys: Vec<String>,
    columns: Vec<Column>,
}

impl FeatureMatrix {
    pub fn new(keys: Vec<String>) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        for k in &keys {
            if !seen.insert(k.as_str()) {
                return Err(FeatureError::DuplicateKey(k.clone()));
            }
        }
        Ok(FeatureMatrix { keys, columns: Vec::new() })
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn row_index(&self, key: &str) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| c.values[row])
    }

    pub fn push_column(
        &mut self,
        name: impl Into<String>,
        provenance: Provenance,
        values: Vec<Option<f64>>,
    ) -> Result<(), FeatureError> {
        let name = name.into();
        if self.column(&name).is_some() {
            return Err(FeatureError::DuplicateColumn(name));
        }
        if values.len() != self.keys.len() {
            return Err(FeatureError::LengthMismatch {
                name,
                expected: self.keys.len(),
                got: values.len(),
            });
        }
        self.columns.push(Column { name, provenance, values });
        Ok(())
    }

    /// Builds a matrix from per-key rows of `(column, value)` pairs. Columns
    /// appear in first-seen order; cells absent from a row are missing.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (String, &'a [(String, Provenance, Option<f64>)])>,
    {
        let mut keys = Vec::new();
        let mut order: Vec<(String, Provenance)> = Vec::new();
        let mut col_index: HashMap<String, usize> = HashMap::new();
        let mut cells: Vec<HashMap<usize, Option<f64>>> = Vec::new();
        for (key, row) in rows {
            let mut m = HashMap::new();
            for (name, prov, v) in row {
                let j = *col_index.entry(name.clone()).or_insert_with(|| {
                    order.push((name.clone(), *prov));
                    order.len() - 1
                });
                m.insert(j, *v);
            }
            keys.push(key);
            cells.push(m);
        }
        let mut out = FeatureMatrix::new(keys)?;
        for (j, (name, prov)) in order.into_iter().enumerate() {
            let values = cells.iter().map(|m| m.get(&j).copied().flatten()).collect();
            out.push_column(name, prov, values)?;
        }
        Ok(out)
    }

    /// Keeps the named columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix, FeatureError> {
        let mut columns = Vec::with_capacity(names.len());
        for n in names {
            let c = self.column(n).ok_or_else(|| FeatureError::UnknownColumn(n.to_string()))?;
            columns.push(c.clone());
        }
        Ok(FeatureMatrix {
            keys: self.keys.clone(),
            columns,
        })
    }

    pub fn select_provenance(&self, tags: &[Provenance]) -> FeatureMatrix {
        FeatureMatrix {
            keys: self.keys.clone(),
            columns: self.columns.iter().filter(|c| tags.contains(&c.provenance)).cloned().collect(),
        }
    }

    pub fn drop_columns(&self, names: &[&str]) -> FeatureMatrix {
        FeatureMatrix {
            keys: self.keys.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| !names.contains(&c.name.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Keeps rows where `keep(row_index)` holds.
    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(i)).collect();
        FeatureMatrix {
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    provenance: c.provenance,
                    values: idx.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
        }
    }

    /// Appends the columns of `other`, matching rows by key. Keys missing
    /// from `other` get missing cells.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        let pos: HashMap<&str, usize> = other.keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
        let mut out = self.clone();
        for c in &other.columns {
            let values = self
                .keys
                .iter()
                .map(|k| pos.get(k.as_str()).and_then(|&i| c.values[i]))
                .collect();
            out.push_column(c.name.clone(), c.provenance, values)?;
        }
        Ok(out)
    }

    /// Column-major dense values for complete columns.
    pub fn dense_columns(&self) -> Result<Vec<Vec<f64>>, FeatureError> {
        self.columns
            .iter()
            .map(|c| {
                c.values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v.ok_or_else(|| FeatureError::Missing {
                            column: c.name.clone(),
                            row: self.keys[i].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Row-major dense values for a complete matrix.
    pub fn dense_rows(&self) -> Result<Vec<Vec<f64>>, FeatureError> {
        let cols = self.dense_columns()?;
        Ok((0..self.n_rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    }

    /// CSV with a leading `key_name` column; missing cells are empty.
    pub fn write_csv<W: Write>(&self, w: W, key_name: &str) -> Result<(), FeatureError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![key_name.to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        wtr.write_record(&header)?;
        for (i, k) in self.keys.iter().enumerate() {
            let mut rec = vec![k.clone()];
            rec.extend(self.columns.iter().map(|c| format_cell(c.values[i])));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Sidecar listing each column's provenance, in column order.
    pub fn write_provenance_json<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        #[derive(Serialize)]
        struct Tag<'a> {
            column: &'a str,
            provenance: Provenance,
        }
        let tags: Vec<Tag> = self
            .columns
            .iter()
            .map(|c| Tag {
                column: &c.name,
                provenance: c.provenance,
            })
            .collect();
        serde_json::to_writer_pretty(w, &tags)?;
        Ok(())
    }
}

pub fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// An external statistics table keyed by state code or county FIPS code.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalTable {
    pub key_name: String,
    pub keys: Vec<String>,
    pub columns: Vec<String>,
    pub provenance: Provenance,
    /// Row-major cells.
    pub rows: Vec<Vec<Option<f64>>>,
    index: HashMap<String, usize>,
}

impl ExternalTable {
    /// Reads a CSV whose first column is the key. Empty cells and `NA` are
    /// missing; any other non-numeric cell is an error, as are repeated keys.
    pub fn from_csv<R: Read>(r: R, provenance: Provenance) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            return Err(FeatureError::Parse {
                row: 1,
                msg: "missing header".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(FeatureError::DuplicateColumn(c.clone()));
            }
        }
        let mut keys = Vec::new();
        let mut rows = Vec::new();
        let mut index = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let key = rec.get(0).unwrap_or("").to_string();
            if key.is_empty() {
                return Err(FeatureError::Parse { row, msg: "empty key".into() });
            }
            if index.insert(key.clone(), keys.len()).is_some() {
                return Err(FeatureError::DuplicateKey(key));
            }
            let mut cells = Vec::with_capacity(columns.len());
            for (j, col) in columns.iter().enumerate() {
                let raw = rec.get(j + 1).unwrap_or("");
                let v = if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                    None
                } else {
                    Some(raw.parse::<f64>().map_err(|_| FeatureError::Parse {
                        row,
                        msg: format!("{col}: {raw:?} is not a number"),
                    })?)
                };
                cells.push(v);
            }
            keys.push(key);
            rows.push(cells);
        }
        Ok(ExternalTable {
            key_name: header[0].to_string(),
            keys,
            columns,
            provenance,
            rows,
            index,
        })
    }

    pub fn get(&self, key: &str) -> Option<&[Option<f64>]> {
        self.index.get(key).map(|&i| self.rows[i].as_slice())
    }

    /// The table as a matrix keyed by its own keys.
    pub fn to_matrix(&self) -> Result<FeatureMatrix, FeatureError> {
        let mut m = FeatureMatrix::new(self.keys.clone())?;
        for (j, c) in self.columns.iter().enumerate() {
            m.push_column(c.clone(), self.provenance, self.rows.iter().map(|r| r[j]).collect())?;
        }
        Ok(m)
    }
}

/// Appends the table's columns to `m`, looking each row up under
/// `key_map[row key]`. Unmatched table keys give missing cells; existing
/// cells are untouched.
pub fn join_external(
    m: &FeatureMatrix,
    t: &ExternalTable,
    key_map: &BTreeMap<String, String>,
) -> Result<FeatureMatrix, FeatureError> {
    let mut lookups = Vec::with_capacity(m.n_rows());
    for k in m.keys() {
        let tk = key_map.get(k).ok_or_else(|| FeatureError::UnmappedRow(k.clone()))?;
        lookups.push(t.get(tk));
    }
    let mut out = m.clone();
    for (j, c) in t.columns.iter().enumerate() {
        let values = lookups.iter().map(|row| row.and_then(|r| r[j])).collect();
        out.push_column(c.clone(), t.provenance, values)?;
    }
    Ok(out)
}

/// The most frequent key; ties go to the smallest key.
pub fn modal_key<'a>(counts: impl IntoIterator<Item = (&'a str, u64)>) -> Option<String> {
    let mut best: Option<(&str, u64)> = None;
    for (k, c) in counts {
        best = match best {
            Some((bk, bc)) if bc > c || (bc == c && bk <= k) => Some((bk, bc)),
            _ => Some((k, c)),
        };
    }
    best.map(|(k, _)| k.to_string())
}

/// Sample skewness `m3 / m2^1.5` of the values; `None` for fewer than 3
/// values or zero variance.
pub fn skewness(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n as f64;
    (m2 > 0.0).then(|| m3 / m2.powf(1.5))
}

/// What [`standardize_and_transform`] did to one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformLog {
    pub column: String,
    pub skew_before: Option<f64>,
    pub log_transformed: bool,
    pub constant: bool,
}

/// Per column: log-transform `ln(1 + x - min)` when |skewness| > 2, then
/// z-score with the n-1 standard deviation. Constant columns become zeros.
/// Missing cells stay missing.
pub fn standardize_and_transform(m: &FeatureMatrix) -> (FeatureMatrix, Vec<TransformLog>) {
    let mut out = m.clone();
    let mut logs = Vec::with_capacity(m.n_cols());
    for c in out.columns.iter_mut() {
        let mut present: Vec<f64> = c.present().collect();
        let skew_before = skewness(&present);
        let log_transformed = skew_before.is_some_and(|s| s.abs() > 2.0);
        if log_transformed {
            let min = present.iter().copied().fold(f64::INFINITY, f64::min);
            for v in c.values.iter_mut().flatten() {
                *v = (1.0 + *v - min).ln();
            }
            present = c.present().collect();
        }
        let n = present.len();
        let mean = if n > 0 { present.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let sd = if n > 1 {
            (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let constant = sd.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater);
        if constant {
            log::warn!("column {} is constant; standardized to zeros", c.name);
        }
        for v in c.values.iter_mut().flatten() {
            *v = if constant { 0.0 } else { (*v - mean) / sd };
        }
        logs.push(TransformLog {
            column: c.name.clone(),
            skew_before,
            log_transformed,
            constant,
        });
    }
    (out, logs)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissingReport {
    /// Columns dropped for exceeding the missing-fraction threshold.
    pub dropped_columns: Vec<String>,
    /// Rows dropped afterwards for holding any missing cell.
    pub dropped_rows: Vec<String>,
}

/// Drops columns whose missing fraction exceeds `col_threshold`, then rows
/// with any remaining missing cell.
pub fn missing_policy(m: &FeatureMatrix, col_threshold: f64) -> (FeatureMatrix, MissingReport) {
    let n = m.n_rows().max(1) as f64;
    let dropped_columns: Vec<String> = m
        .columns
        .iter()
        .filter(|c| c.missing_count() as f64 / n > col_threshold)
        .map(|c| c.name.clone())
        .collect();
    let names: Vec<&str> = dropped_columns.iter().map(String::as_str).collect();
    let kept = m.drop_columns(&names);
    let complete: Vec<bool> = (0..kept.n_rows())
        .map(|i| kept.columns.iter().all(|c| c.values[i].is_some()))
        .collect();
    let dropped_rows = kept
        .keys
        .iter()
        .zip(&complete)
        .filter(|(_, &ok)| !ok)
        .map(|(k, _)| k.clone())
        .collect();
    let out = kept.filter_rows(|i| complete[i]);
    (
        out,
        MissingReport {
            dropped_columns,
            dropped_rows,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[(&str, &[Option<f64>])]) -> FeatureMatrix {
        let n = cols.first().map(|c| c.1.len()).unwrap_or(0);
        let mut m = FeatureMatrix::new((0..n).map(|i| format!("r{i}")).collect()).unwrap();
        for (name, v) in cols {
            m.push_column(*name, Provenance::Content, v.to_vec()).unwrap();
        }
        m
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]).unwrap();
        m.push_column("x", Provenance::Network, vec![Some(1.0), None]).unwrap();
        assert!(m.push_column("x", Provenance::Network, vec![None, None]).is_err());
        assert!(m.push_column("y", Provenance::Network, vec![None]).is_err());
        assert!(FeatureMatrix::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn zscore_of_one_two_three() {
        let m = matrix(&[("x", &[Some(1.0), Some(2.0), Some(3.0)])]);
        let (s, logs) = standardize_and_transform(&m);
        assert_eq!(s.columns()[0].values, vec![Some(-1.0), Some(0.0), Some(1.0)]);
        assert!(!logs[0].log_transformed);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let m = matrix(&[("c", &[Some(4.0), Some(4.0), None])]);
        let (s, logs) = standardize_and_transform(&m);
        assert_eq!(s.columns()[0].values, vec![Some(0.0), Some(0.0), None]);
        assert!(logs[0].constant);
    }

    #[test]
    fn heavy_tail_is_log_transformed() {
        let mut v: Vec<Option<f64>> = (0..30).map(|i| Some(1.0 + (i % 3) as f64)).collect();
        v.push(Some(1000.0));
        let before = skewness(&v.iter().flatten().copied().collect::<Vec<_>>()).unwrap();
        let m = matrix(&[("x", &v)]);
        let (s, logs) = standardize_and_transform(&m);
        assert!(logs[0].log_transformed);
        let after = skewness(&s.columns()[0].present().collect::<Vec<_>>()).unwrap();
        assert!(after.abs() < before.abs());
    }

    #[test]
    fn missing_policy_hand_trace() {
        let x = Some(1.0);
        // 10 rows, 5 columns. c (6/10 missing) is dropped; d (5/10) stays at
        // threshold 0.5. Rows with a missing cell in a, b, d or e go:
        // r0 (a), r3 (b), r5..r9 (d) -> 3 rows survive: r1, r2, r4.
        let a = [None, x, x, x, x, x, x, x, x, x];
        let b = [x, x, x, None, x, x, x, x, x, x];
        let c = [None, None, None, None, None, None, x, x, x, x];
        let d = [x, x, x, x, x, None, None, None, None, None];
        let e = [x; 10];
        let m = matrix(&[("a", &a), ("b", &b), ("c", &c), ("d", &d), ("e", &e)]);
        let (out, rep) = missing_policy(&m, 0.5);
        assert_eq!(rep.dropped_columns, vec!["c"]);
        assert_eq!(out.n_cols(), 4);
        assert_eq!(out.keys(), ["r1", "r2", "r4"]);
        let (same, rep) = missing_policy(&matrix(&[("e", &e)]), 0.5);
        assert_eq!(same.n_rows(), 10);
        assert!(rep.dropped_columns.is_empty() && rep.dropped_rows.is_empty());
    }

    #[test]
    fn column_sixty_percent_missing_dropped() {
        let x = Some(0.0);
        let c = [None, None, None, None, None, None, x, x, x, x];
        let (out, _) = missing_policy(&matrix(&[("c", &c)]), 0.5);
        assert_eq!(out.n_cols(), 0);
    }

    #[test]
    fn join_keeps_existing_cells_and_marks_misses() {
        let csv = "state,income,gop\nNY,70,0.3\nTX,60,\n";
        let t = ExternalTable::from_csv(csv.as_bytes(), Provenance::Economic).unwrap();
        let m = matrix(&[("x", &[Some(1.0), Some(2.0), Some(3.0)])]);
        let key_map: BTreeMap<String, String> = [("r0", "NY"), ("r1", "TX"), ("r2", "WY")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let j = join_external(&m, &t, &key_map).unwrap();
        assert_eq!(j.column("x"), m.column("x"));
        assert_eq!(j.column("income").unwrap().values, vec![Some(70.0), Some(60.0), None]);
        assert_eq!(j.column("gop").unwrap().values, vec![Some(0.3), None, None]);
        assert!(ExternalTable::from_csv("k,a\nNY,1\nNY,2\n".as_bytes(), Provenance::Health).is_err());
        assert!(ExternalTable::from_csv("k,a\nNY,abc\n".as_bytes(), Provenance::Health).is_err());
    }

    #[test]
    fn county_join_with_modal_county() {
        // u1 tweeted most from 36061; u2 ties between 06037 and 36061, the
        // smaller code wins; u3 has no county and stays missing.
        let counts: BTreeMap<&str, Vec<(&str, u64)>> = [
            ("u1", vec![("36061", 5), ("06037", 1)]),
            ("u2", vec![("36061", 2), ("06037", 2)]),
            ("u3", vec![]),
        ]
        .into_iter()
        .collect();
        let mut key_map = BTreeMap::new();
        for (u, c) in &counts {
            key_map.insert(u.to_string(), modal_key(c.iter().copied()).unwrap_or_default());
        }
        let t = ExternalTable::from_csv("fips,smoking\n36061,0.12\n06037,0.14\n".as_bytes(), Provenance::Health).unwrap();
        let mut m = FeatureMatrix::new(vec!["u1".into(), "u2".into(), "u3".into()]).unwrap();
        m.push_column("x", Provenance::Network, vec![None; 3]).unwrap();
        let j = join_external(&m, &t, &key_map).unwrap();
        assert_eq!(j.column("smoking").unwrap().values, vec![Some(0.12), Some(0.14), None]);
    }

    #[test]
    fn csv_and_sidecar() {
        let m = matrix(&[("a", &[Some(0.5), None])]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf, "state").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "state,a\nr0,0.5\nr1,\n");
        let mut buf = Vec::new();
        m.write_provenance_json(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\"content\""));
    }
}
