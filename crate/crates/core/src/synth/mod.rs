//! Synthetic data with planted ground truth.
//!
//! [`generate`] produces a complete dataset in the same file formats the
//! ingestion layer reads: a two-block stochastic block model of retweets,
//! posts and profiles consistent with it (plus accounts built to trip each
//! account filter), lexicons, a gazetteer, anchor accounts, attendance
//! labels and a 51-state panel whose law rating is a known linear function
//! of a few columns. Every generator is a pure function of its config and
//! seed.

mod corpus;
mod panel;

pub use corpus::{generate_corpus, Corpus, Vocabulary};
pub use panel::{generate_state_panel, PanelColumn, StatePanel, PANEL_COLUMNS};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::EndorsementGraph;
use crate::ingest::{write_posts, write_profiles, FilterRule, IngestError, StateCode};
use crate::partition::Side;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Gazetteer(#[from] crate::ingest::GazetteerError),
}

/// How the state law rating is emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingMode {
    /// Clipped to 1..=5 and rounded to an integer.
    Rounded,
    /// The raw linear combination plus noise.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Accounts in the retweet network (all of them pass the filters).
    pub n_users: usize,
    /// Size of the control block over the rights block.
    pub ratio: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub weight_min: u64,
    pub weight_max: u64,
    pub tweets_min: usize,
    pub tweets_max: usize,
    pub tokens_per_tweet: usize,
    /// Words per class vocabulary.
    pub vocab_size: usize,
    /// Fraction of each class vocabulary shared with the other class.
    pub vocab_overlap: f64,
    /// Probability that a token comes from a class-neutral noise list.
    pub token_noise: f64,
    pub zipf_exponent: f64,
    /// Single retweets per user toward random non-neighbors; they fall
    /// below the usual minimum edge weight of 2.
    pub one_off_retweets: usize,
    pub non_english_rate: f64,
    /// Fraction of all generated accounts built to fail one account filter
    /// (the top-volume accounts are added on top).
    pub violation_rate: f64,
    /// Fraction of network users located by GPS rather than profile text.
    pub gps_fraction: f64,
    pub window_start: i64,
    pub window_end: i64,
    /// Standardized coefficients of the law rating.
    pub state_coefficients: BTreeMap<String, f64>,
    pub rating_intercept: f64,
    pub rating_noise_sd: f64,
    pub rating_mode: RatingMode,
    pub attendance_intercept: f64,
    pub attendance_slope: f64,
    pub hashtag_pool: usize,
    pub anchors_per_side: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 2000,
            ratio: 1.5,
            p_in: 0.02,
            p_out: 0.001,
            weight_min: 2,
            weight_max: 5,
            tweets_min: 20,
            tweets_max: 60,
            tokens_per_tweet: 8,
            vocab_size: 300,
            vocab_overlap: 0.2,
            token_noise: 0.0,
            zipf_exponent: 1.0,
            one_off_retweets: 2,
            non_english_rate: 0.05,
            violation_rate: 0.1,
            gps_fraction: 0.5,
            window_start: 1_518_566_400,
            window_end: 1_523_750_400,
            state_coefficients: [
                ("perc_vote_republican", 0.8),
                ("gun_sales", 0.6),
                ("perc_rural", 0.5),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
            rating_intercept: 3.0,
            rating_noise_sd: 0.3,
            rating_mode: RatingMode::Rounded,
            attendance_intercept: -1.0,
            attendance_slope: 2.5,
            hashtag_pool: 60,
            anchors_per_side: 5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("vocab_overlap", self.vocab_overlap),
            ("token_noise", self.token_noise),
            ("non_english_rate", self.non_english_rate),
            ("gps_fraction", self.gps_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(0.0..1.0).contains(&self.violation_rate) {
            return bad(format!("violation_rate = {} must be in [0, 1)", self.violation_rate));
        }
        let (a, b) = self.block_sizes();
        if a == 0 || b == 0 || !(self.ratio > 0.0) {
            return bad(format!("ratio {} with {} users leaves a block empty", self.ratio, self.n_users));
        }
        if self.weight_min < 1 || self.weight_min > self.weight_max {
            return bad("need 1 <= weight_min <= weight_max".into());
        }
        if self.tweets_min < 3 || self.tweets_min > self.tweets_max {
            return bad("need 3 <= tweets_min <= tweets_max".into());
        }
        if self.tokens_per_tweet == 0 || self.vocab_size < 2 {
            return bad("tokens_per_tweet and vocab_size must be positive".into());
        }
        if self.window_end <= self.window_start {
            return bad("window_end must follow window_start".into());
        }
        if self.hashtag_pool == 0 {
            return bad("hashtag_pool must be positive".into());
        }
        for name in self.state_coefficients.keys() {
            if !PANEL_COLUMNS.iter().any(|c| c.name == name) {
                return bad(format!("unknown panel column {name:?} in state_coefficients"));
            }
        }
        Ok(())
    }

    /// (control, rights) block sizes; control is the larger block when
    /// `ratio > 1`.
    pub fn block_sizes(&self) -> (usize, usize) {
        let control = (self.n_users as f64 * self.ratio / (1.0 + self.ratio)).round() as usize;
        (control.min(self.n_users), self.n_users - control.min(self.n_users))
    }
}

/// Planted facts about one generated account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: String,
    /// `None` for accounts outside the network.
    pub side: Option<Side>,
    pub state: Option<StateCode>,
    pub attended: bool,
    /// Latent activism trait driving attendance and hashtag diversity.
    pub activism: f64,
    pub located_by_gps: bool,
    /// The first filter this account is built to fail; `None` means kept.
    pub expected_rule: Option<FilterRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Sorted by user id.
    pub users: Vec<UserTruth>,
    /// Standardized law-rating coefficients.
    pub coefficients: BTreeMap<String, f64>,
    /// Coefficients on the raw (unstandardized) panel columns.
    pub raw_coefficients: BTreeMap<String, f64>,
    /// R^2 of the rating regressed on the active panel columns.
    pub planted_r2: Option<f64>,
}

impl GroundTruth {
    pub fn get(&self, id: &str) -> Option<&UserTruth> {
        self.users
            .binary_search_by(|u| u.user_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.users[i])
    }

    /// Planted side of every network account.
    pub fn planted_sides(&self) -> BTreeMap<String, Side> {
        self.users
            .iter()
            .filter_map(|u| u.side.map(|s| (u.user_id.clone(), s)))
            .collect()
    }

    pub fn kept_ids(&self) -> Vec<&str> {
        self.users
            .iter()
            .filter(|u| u.expected_rule.is_none())
            .map(|u| u.user_id.as_str())
            .collect()
    }
}

pub fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

/// Independent stream for one generation stage.
fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng
}

/// Index pairs of a Bernoulli(p) draw over `total` slots, by geometric
/// skipping.
fn bernoulli_slots(total: u64, p: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    if p <= 0.0 || total == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let skip = Geometric::new(p).expect("p checked");
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        k = k.saturating_add(skip.sample(rng));
        if k >= total {
            return out;
        }
        out.push(k);
        k += 1;
    }
}

/// Two-block directed stochastic block model over `cfg.n_users` accounts.
/// Block membership is a seeded permutation; each ordered pair inside a
/// block carries an edge with probability `p_in`, across blocks `p_out`,
/// with weights uniform on `weight_min..=weight_max`. All accounts are
/// nodes, so isolated ones survive. States, the activism trait and
/// attendance are drawn here too, from their own streams.
pub fn generate_network(cfg: &SynthConfig, seed: u64) -> Result<(EndorsementGraph, GroundTruth), SynthError> {
    cfg.validate()?;
    let n = cfg.n_users;
    let ids: Vec<String> = (0..n).map(user_id).collect();
    let (n_control, _) = cfg.block_sizes();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stage_rng(seed, 1));
    let mut side = vec![Side::Rights; n];
    for &i in &order[..n_control] {
        side[i] = Side::Control;
    }
    let blocks: [Vec<usize>; 2] = [
        (0..n).filter(|&i| side[i] == Side::Control).collect(),
        (0..n).filter(|&i| side[i] == Side::Rights).collect(),
    ];

    let mut rng = stage_rng(seed, 2);
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    for (a, src) in blocks.iter().enumerate() {
        for (b, dst) in blocks.iter().enumerate() {
            let (p, total) = if a == b {
                (cfg.p_in, (src.len() * src.len().saturating_sub(1)) as u64)
            } else {
                (cfg.p_out, (src.len() * dst.len()) as u64)
            };
            for k in bernoulli_slots(total, p, &mut rng) {
                let (s, t) = if a == b {
                    let m = (src.len() - 1) as u64;
                    let (s, r) = (k / m, k % m);
                    (s, if r < s { r } else { r + 1 })
                } else {
                    (k / dst.len() as u64, k % dst.len() as u64)
                };
                let w = rng.random_range(cfg.weight_min..=cfg.weight_max);
                edges.push((src[s as usize], dst[t as usize], w));
            }
        }
    }
    let graph = EndorsementGraph::from_edges(
        ids.iter().map(String::as_str),
        edges.iter().map(|&(s, t, w)| (ids[s].as_str(), ids[t].as_str(), w)),
        cfg.weight_min,
    )
    .map_err(|e| SynthError::Config(e.to_string()))?;

    let states = assign_states(n, &mut stage_rng(seed, 3));
    let mut rng = stage_rng(seed, 4);
    let gps = (0..n).map(|_| rng.random_bool(cfg.gps_fraction)).collect::<Vec<_>>();
    let mut rng = stage_rng(seed, 5);
    let users = (0..n)
        .map(|i| {
            let t: f64 = StandardNormal.sample(&mut rng);
            let logit = cfg.attendance_intercept + cfg.attendance_slope * t;
            let attended = rng.random_bool(1.0 / (1.0 + (-logit).exp()));
            UserTruth {
                user_id: ids[i].clone(),
                side: Some(side[i]),
                state: Some(states[i]),
                attended,
                activism: t,
                located_by_gps: gps[i],
                expected_rule: None,
            }
        })
        .collect();
    Ok((
        graph,
        GroundTruth {
            users,
            coefficients: BTreeMap::new(),
            raw_coefficients: BTreeMap::new(),
            planted_r2: None,
        },
    ))
}

/// Home states with seeded log-normal population weights.
fn assign_states(n: usize, rng: &mut ChaCha8Rng) -> Vec<StateCode> {
    let all: Vec<StateCode> = StateCode::all().collect();
    let spread = LogNormal::new(0.0, 0.6).expect("valid");
    let weights: Vec<f64> = all.iter().map(|_| spread.sample(rng)).collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    (0..n).map(|_| all[pick.sample(rng)]).collect()
}

/// Everything [`write_dataset`] puts on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: EndorsementGraph,
    pub truth: GroundTruth,
    pub corpus: Corpus,
    pub panel: StatePanel,
}

/// Runs the network, corpus and panel generators with stage seeds derived
/// from `seed`.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset, SynthError> {
    let (graph, truth) = generate_network(cfg, seed)?;
    let (corpus, mut truth) = generate_corpus(cfg, &graph, truth, seed.wrapping_add(0x5eed_0001))?;
    let panel = generate_state_panel(cfg, seed.wrapping_add(0x5eed_0002))?;
    truth.coefficients = panel.coefficients.clone();
    truth.raw_coefficients = panel.raw_coefficients.clone();
    truth.planted_r2 = panel.planted_r2;
    Ok(Dataset {
        graph,
        truth,
        corpus,
        panel,
    })
}

/// File names written by [`write_dataset`].
pub mod files {
    pub const POSTS: &str = "posts.jsonl";
    pub const PROFILES: &str = "profiles.jsonl";
    pub const GAZETTEER: &str = "gazetteer.csv";
    pub const ANCHORS: &str = "anchors.csv";
    pub const ATTENDEES: &str = "attendees.txt";
    pub const HATE: &str = "hate_lexicon.csv";
    pub const SENTIMENT: &str = "sentiment_lexicon.csv";
    pub const CATEGORIES: &str = "categories.dic";
    pub const DEMOGRAPHIC: &str = "demographic.csv";
    pub const ECONOMIC: &str = "economic.csv";
    pub const HEALTH: &str = "health.csv";
    pub const POLITICS: &str = "politics.csv";
    pub const RATINGS: &str = "law_ratings.csv";
    pub const TRUTH: &str = "ground_truth.json";
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, SynthError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the dataset into `dir` (created if needed).
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir)?;
    let c = &ds.corpus;
    write_posts(create(dir, files::POSTS)?, &c.posts)?;
    write_profiles(create(dir, files::PROFILES)?, &c.profiles)?;
    c.gazetteer.write_csv(create(dir, files::GAZETTEER)?)?;

    let mut w = csv::Writer::from_writer(create(dir, files::ANCHORS)?);
    w.write_record(["user_id", "side"])?;
    for (id, side) in &c.anchors {
        w.write_record([id.as_str(), side.as_str()])?;
    }
    w.flush()?;

    let mut w = create(dir, files::ATTENDEES)?;
    for u in ds.truth.users.iter().filter(|u| u.attended && u.expected_rule.is_none()) {
        writeln!(w, "{}", u.user_id)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, files::HATE)?);
    w.write_record(["term"])?;
    for t in &c.hate_terms {
        w.write_record([t])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, files::SENTIMENT)?);
    w.write_record(["word", "score"])?;
    for (t, s) in &c.sentiment {
        w.write_record([t.clone(), format!("{s:.2}")])?;
    }
    w.flush()?;

    let mut w = create(dir, files::CATEGORIES)?;
    for (cat, patterns) in &c.categories {
        writeln!(w, "[{cat}]")?;
        for p in patterns {
            writeln!(w, "{p}")?;
        }
    }
    w.flush()?;

    ds.panel.write_tables(dir)?;

    let mut w = create(dir, files::TRUTH)?;
    serde_json::to_writer_pretty(&mut w, &ds.truth)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
