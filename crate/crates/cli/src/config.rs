//! Run configuration: one TOML file with flat sections per pipeline stage.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Input files may be listed one by one under `[inputs]`, or found by
//! their standard names inside `inputs.data_dir` (the layout `engage synth`
//! writes).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use engage_core::synth::{files, SynthConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for every randomized step.
    pub seed: u64,
    #[serde(default = "default_outdir")]
    pub outdir: PathBuf,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub ingest: IngestParams,
    #[serde(default)]
    pub stance: StanceParams,
    #[serde(default)]
    pub state_model: StateModelParams,
    #[serde(default)]
    pub predict: PredictParams,
    #[serde(default)]
    pub top_terms: TopTermsParams,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_outdir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub data_dir: Option<PathBuf>,
    pub posts: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub attendees: Option<PathBuf>,
    pub hate_lexicon: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    /// One stopword per line; the built-in English list when absent.
    pub stopwords: Option<PathBuf>,
    pub demographic: Option<PathBuf>,
    pub economic: Option<PathBuf>,
    pub health: Option<PathBuf>,
    pub politics: Option<PathBuf>,
    pub law_ratings: Option<PathBuf>,
    /// Planted labels of a synthetic dataset, used only for reporting.
    pub ground_truth: Option<PathBuf>,
}

/// The input files a command may ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Posts,
    Profiles,
    Gazetteer,
    Anchors,
    Attendees,
    HateLexicon,
    SentimentLexicon,
    Categories,
    Stopwords,
    Demographic,
    Economic,
    Health,
    Politics,
    LawRatings,
    GroundTruth,
}

impl Input {
    pub fn key(self) -> &'static str {
        match self {
            Input::Posts => "posts",
            Input::Profiles => "profiles",
            Input::Gazetteer => "gazetteer",
            Input::Anchors => "anchors",
            Input::Attendees => "attendees",
            Input::HateLexicon => "hate_lexicon",
            Input::SentimentLexicon => "sentiment_lexicon",
            Input::Categories => "categories",
            Input::Stopwords => "stopwords",
            Input::Demographic => "demographic",
            Input::Economic => "economic",
            Input::Health => "health",
            Input::Politics => "politics",
            Input::LawRatings => "law_ratings",
            Input::GroundTruth => "ground_truth",
        }
    }

    fn default_name(self) -> Option<&'static str> {
        Some(match self {
            Input::Posts => files::POSTS,
            Input::Profiles => files::PROFILES,
            Input::Gazetteer => files::GAZETTEER,
            Input::Anchors => files::ANCHORS,
            Input::Attendees => files::ATTENDEES,
            Input::HateLexicon => files::HATE,
            Input::SentimentLexicon => files::SENTIMENT,
            Input::Categories => files::CATEGORIES,
            Input::Demographic => files::DEMOGRAPHIC,
            Input::Economic => files::ECONOMIC,
            Input::Health => files::HEALTH,
            Input::Politics => files::POLITICS,
            Input::LawRatings => files::RATINGS,
            Input::GroundTruth => files::TRUTH,
            Input::Stopwords => return None,
        })
    }

    fn explicit(self, i: &Inputs) -> Option<&PathBuf> {
        match self {
            Input::Posts => i.posts.as_ref(),
            Input::Profiles => i.profiles.as_ref(),
            Input::Gazetteer => i.gazetteer.as_ref(),
            Input::Anchors => i.anchors.as_ref(),
            Input::Attendees => i.attendees.as_ref(),
            Input::HateLexicon => i.hate_lexicon.as_ref(),
            Input::SentimentLexicon => i.sentiment_lexicon.as_ref(),
            Input::Categories => i.categories.as_ref(),
            Input::Stopwords => i.stopwords.as_ref(),
            Input::Demographic => i.demographic.as_ref(),
            Input::Economic => i.economic.as_ref(),
            Input::Health => i.health.as_ref(),
            Input::Politics => i.politics.as_ref(),
            Input::LawRatings => i.law_ratings.as_ref(),
            Input::GroundTruth => i.ground_truth.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    /// Collection window in Unix seconds; account ages and tweet rates are
    /// measured at its end.
    pub window_start: i64,
    pub window_end: i64,
}

impl Default for IngestParams {
    fn default() -> Self {
        let s = SynthConfig::default();
        IngestParams {
            window_start: s.window_start,
            window_end: s.window_end,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StanceParams {
    pub min_edge_weight: u64,
    pub runs: u32,
    pub balance_candidates: Vec<f64>,
    pub nb_alpha: f64,
    pub nb_threshold: f64,
    pub nb_folds: usize,
}

impl Default for StanceParams {
    fn default() -> Self {
        StanceParams {
            min_edge_weight: 2,
            runs: 20,
            balance_candidates: vec![1.0, 1.5, 2.0],
            nb_alpha: 1.0,
            nb_threshold: 0.99,
            nb_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateModelParams {
    pub min_abs_r: f64,
    pub max_vif: f64,
}

impl Default for StateModelParams {
    fn default() -> Self {
        StateModelParams {
            min_abs_r: 0.3,
            max_vif: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictParams {
    pub k: usize,
    pub missing_threshold: f64,
    /// Control cohort size; the attendee count when absent.
    pub control_size: Option<usize>,
    /// Cumulative ablation steps, each a string of group letters.
    pub cumulative: Vec<String>,
    /// Groups of the model whose logistic coefficients are reported.
    pub coefficient_groups: String,
    pub top_coefficients: usize,
}

impl Default for PredictParams {
    fn default() -> Self {
        PredictParams {
            k: 5,
            missing_threshold: 0.5,
            control_size: None,
            cumulative: ["C", "CB", "CBL", "CBLD", "CBLDS", "CBLDSH", "CBLDSHP", "CBLDSHPN"]
                .map(String::from)
                .to_vec(),
            coefficient_groups: "CBLD".into(),
            top_coefficients: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopTermsParams {
    /// Combined count a token needs in the two side corpora.
    pub min_count: u64,
    pub min_z: f64,
    pub limit: usize,
    pub prior_scale: f64,
}

impl Default for TopTermsParams {
    fn default() -> Self {
        TopTermsParams {
            min_count: 10,
            min_z: 1.96,
            limit: 50,
            prior_scale: engage_core::text::DEFAULT_PRIOR_SCALE,
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. `seed` replaces the file's seed.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config in memory; relative paths resolve against `base_dir`.
    pub fn with_base_dir(mut self, base_dir: impl Into<PathBuf>) -> Self {
        self.base_dir = base_dir.into();
        self
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `<outdir>/<command>`.
    pub fn command_dir(&self, command: &str) -> PathBuf {
        self.resolve(&self.outdir).join(command)
    }

    /// Path of an input that must exist.
    pub fn require(&self, which: Input) -> Result<PathBuf> {
        match self.locate(which) {
            Some(p) if p.is_file() => Ok(p),
            Some(p) => bail!("input {} not found: {}", which.key(), p.display()),
            None => bail!("input {} is not configured (set inputs.{} or inputs.data_dir)", which.key(), which.key()),
        }
    }

    /// Path of an optional input. A file named explicitly must exist; a file
    /// expected under `data_dir` may be absent.
    pub fn optional(&self, which: Input) -> Result<Option<PathBuf>> {
        if self.inputs_explicit(which) {
            return self.require(which).map(Some);
        }
        Ok(self.locate(which).filter(|p| p.is_file()))
    }

    fn inputs_explicit(&self, which: Input) -> bool {
        which.explicit(&self.inputs).is_some()
    }

    fn locate(&self, which: Input) -> Option<PathBuf> {
        if let Some(p) = which.explicit(&self.inputs) {
            return Some(self.resolve(p));
        }
        let dir = self.inputs.data_dir.as_ref()?;
        Some(self.resolve(dir).join(which.default_name()?))
    }

    fn validate(&self) -> Result<()> {
        let s = &self.stance;
        if s.runs == 0 {
            bail!("stance.runs must be at least 1");
        }
        if s.balance_candidates.is_empty() || s.balance_candidates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            bail!("stance.balance_candidates must be a non-empty list of positive ratios");
        }
        if !(s.nb_threshold > 0.5 && s.nb_threshold <= 1.0) {
            bail!("stance.nb_threshold must lie in (0.5, 1]");
        }
        if !(s.nb_alpha > 0.0) {
            bail!("stance.nb_alpha must be positive");
        }
        if s.nb_folds < 2 {
            bail!("stance.nb_folds must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.state_model.min_abs_r) || !(self.state_model.max_vif > 1.0) {
            bail!("state_model.min_abs_r must lie in [0, 1] and state_model.max_vif exceed 1");
        }
        let p = &self.predict;
        if p.k < 2 {
            bail!("predict.k must be at least 2");
        }
        if !(0.0..=1.0).contains(&p.missing_threshold) {
            bail!("predict.missing_threshold must lie in [0, 1]");
        }
        for step in p.cumulative.iter().chain(std::iter::once(&p.coefficient_groups)) {
            crate::commands::predict::parse_groups(step)?;
        }
        let t = &self.top_terms;
        if !(t.prior_scale > 0.0) || t.limit == 0 {
            bail!("top_terms.prior_scale must be positive and top_terms.limit at least 1");
        }
        if self.ingest.window_end <= self.ingest.window_start {
            bail!("ingest.window_end must be after ingest.window_start");
        }
        self.synth.validate().context("invalid [synth] section")?;
        Ok(())
    }
}
