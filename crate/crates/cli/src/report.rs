//! Report writers and the input readers shared by several commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use engage_core::features::{ContentResources, ExternalTable, Provenance};
use engage_core::synth::GroundTruth;
use engage_core::text::{CategoryDictionary, Lexicon, Stopwords};
use engage_core::Side;
use serde::Serialize;

use crate::config::{Input, RunConfig};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// Fixed six-decimal rendering used in every CSV report.
pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

/// Scientific rendering for p-values, which are often far below 1e-6.
pub fn pval(p: f64) -> String {
    format!("{p:.3e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Significance code of an F-test p-value.
pub fn stars(p: f64) -> &'static str {
    if p < 0.0001 {
        "***"
    } else if p < 0.001 {
        "**"
    } else if p < 0.01 {
        "*"
    } else if p < 0.05 {
        "."
    } else {
        ""
    }
}

/// `user_id,side` rows; every side must be control or rights.
pub fn read_anchors(path: &Path) -> Result<Vec<(String, Side)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        let id = rec.get(0).unwrap_or("");
        let side: Side = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: String| anyhow::anyhow!("{} row {}: {e}", path.display(), i + 2))?;
        if id.is_empty() || side == Side::Unknown {
            bail!("{} row {}: anchors need a user id and a control or rights side", path.display(), i + 2);
        }
        out.push((id.to_string(), side));
    }
    if out.is_empty() {
        bail!("{} lists no anchors", path.display());
    }
    Ok(out)
}

/// One user id per line; blank lines and `#` comments are skipped.
pub fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for line in open(path)?.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() && !id.starts_with('#') {
            out.insert(id.to_string());
        }
    }
    Ok(out)
}

pub fn read_truth(cfg: &RunConfig) -> Result<Option<GroundTruth>> {
    let Some(path) = cfg.optional(Input::GroundTruth)? else {
        return Ok(None);
    };
    let truth = serde_json::from_reader(open(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(truth))
}

/// The configured stopword list, or the built-in English one.
pub fn load_stopwords(cfg: &RunConfig) -> Result<Stopwords> {
    Ok(match cfg.optional(Input::Stopwords)? {
        Some(p) => Stopwords::from_reader(open(&p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Stopwords::english(),
    })
}

pub fn load_resources(cfg: &RunConfig) -> Result<ContentResources> {
    let stopwords = load_stopwords(cfg)?;
    let lexicon = |which: Input| -> Result<Lexicon> {
        let p = cfg.require(which)?;
        Lexicon::from_reader(open(&p)?).with_context(|| format!("reading {}", p.display()))
    };
    let p = cfg.require(Input::Categories)?;
    let categories = CategoryDictionary::from_reader(open(&p)?).with_context(|| format!("reading {}", p.display()))?;
    Ok(ContentResources {
        stopwords,
        hate: lexicon(Input::HateLexicon)?,
        sentiment: lexicon(Input::SentimentLexicon)?,
        categories,
    })
}

/// The four state-keyed statistics tables.
pub fn load_external_tables(cfg: &RunConfig) -> Result<Vec<ExternalTable>> {
    [
        (Input::Demographic, Provenance::Demographic),
        (Input::Economic, Provenance::Economic),
        (Input::Health, Provenance::Health),
        (Input::Politics, Provenance::Politics),
    ]
    .into_iter()
    .map(|(which, prov)| {
        let p = cfg.require(which)?;
        ExternalTable::from_csv(open(&p)?, prov).with_context(|| format!("reading {}", p.display()))
    })
    .collect()
}

pub const SIDES_FILE: &str = "sides.csv";

/// Side labels written by `stance`.
pub fn read_sides(cfg: &RunConfig) -> Result<BTreeMap<String, Side>> {
    let path = cfg.command_dir("stance").join(SIDES_FILE);
    let mut rdr = csv::Reader::from_reader(
        File::open(&path).with_context(|| format!("opening {} (run `engage stance` first)", path.display()))?,
    );
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let side: Side = rec.get(1).unwrap_or("").parse().map_err(|e: String| anyhow::anyhow!(e))?;
        out.insert(rec.get(0).unwrap_or("").to_string(), side);
    }
    Ok(out)
}
