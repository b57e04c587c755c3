use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{stage_rng, user_id, GroundTruth, SynthConfig, SynthError, UserTruth};
use crate::graph::EndorsementGraph;
use crate::ingest::{BoundingBox, FilterRule, Gazetteer, Post, Profile, StateCode};
use crate::partition::Side;

const DAY: i64 = 86_400;

const CONTROL_SEEDS: [&str; 10] = [
    "gunsense",
    "background",
    "checks",
    "neveragain",
    "enough",
    "marchforourlives",
    "momsdemand",
    "ban",
    "assault",
    "reform",
];
const RIGHTS_SEEDS: [&str; 10] = [
    "2a",
    "nra",
    "shallnotbeinfringed",
    "constitution",
    "selfdefense",
    "liberty",
    "guns",
    "freedom",
    "secondamendment",
    "concealed",
];
const SHARED_SEEDS: [&str; 8] = ["gun", "school", "shooting", "vote", "law", "people", "kids", "police"];
const NOISE_WORDS: usize = 50;
const GPS_TWEETS: usize = 3;

/// Rules given to the non-top-volume violators, round-robin.
const ROTATING_RULES: [FilterRule; 7] = [
    FilterRule::SingleTweet,
    FilterRule::FewFollowersOrFriends,
    FilterRule::FriendRatio,
    FilterRule::YoungAccount,
    FilterRule::NoEnglishTweet,
    FilterRule::UnresolvedState,
    FilterRule::FewStateTweets,
];

/// Class vocabularies with Zipf-like emission weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Emission order per class (most frequent first): `[control, rights]`.
    pub classes: [Vec<String>; 2],
    /// Words that appear in both class lists.
    pub shared: Vec<String>,
    /// Class-neutral words used for token noise and off-network accounts.
    pub noise: Vec<String>,
    #[serde(skip)]
    pickers: Option<[WeightedIndex<f64>; 2]>,
}

fn class_slot(side: Side) -> usize {
    match side {
        Side::Rights => 1,
        _ => 0,
    }
}

impl Vocabulary {
    pub fn build(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let v = cfg.vocab_size;
        let n_shared = ((cfg.vocab_overlap * v as f64).round() as usize).min(v);
        let n_spec = v - n_shared;
        let fill = |seeds: &[&str], prefix: &str, n: usize| -> (Vec<String>, Vec<String>) {
            let head: Vec<String> = seeds.iter().take(n).map(|s| s.to_string()).collect();
            let tail = (0..n - head.len()).map(|k| format!("{prefix}{k:03}")).collect();
            (head, tail)
        };
        let shared = fill(&SHARED_SEEDS, "gen", n_shared);
        let classes = [("ctl", &CONTROL_SEEDS), ("rts", &RIGHTS_SEEDS)].map(|(prefix, seeds)| {
            let spec = fill(seeds, prefix, n_spec);
            let mut rest: Vec<String> = spec.1.iter().chain(&shared.1).cloned().collect();
            rest.shuffle(rng);
            spec.0.iter().chain(&shared.0).cloned().chain(rest).collect::<Vec<_>>()
        });
        let mut vocab = Vocabulary {
            classes,
            shared: shared.0.into_iter().chain(shared.1).collect(),
            noise: (0..NOISE_WORDS).map(|k| format!("misc{k:03}")).collect(),
            pickers: None,
        };
        vocab.prepare(cfg.zipf_exponent);
        vocab
    }

    fn prepare(&mut self, exponent: f64) {
        let picker = |n: usize| {
            WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(exponent))).expect("non-empty vocabulary")
        };
        self.pickers = Some([picker(self.classes[0].len()), picker(self.classes[1].len())]);
    }

    pub fn words(&self, side: Side) -> &[String] {
        &self.classes[class_slot(side)]
    }

    fn draw<'a>(&'a self, side: Side, noise: f64, rng: &mut ChaCha8Rng) -> &'a str {
        if noise > 0.0 && rng.random_bool(noise) {
            return self.noise.choose(rng).expect("noise words");
        }
        let c = class_slot(side);
        let pick = &self.pickers.as_ref().expect("prepared")[c];
        &self.classes[c][pick.sample(rng)]
    }

    fn sentence(&self, side: Side, len: usize, noise: f64, rng: &mut ChaCha8Rng) -> String {
        let words: Vec<&str> = (0..len).map(|_| self.draw(side, noise, rng)).collect();
        words.join(" ")
    }

    fn neutral_sentence(&self, len: usize, rng: &mut ChaCha8Rng) -> String {
        let pool = if self.shared.is_empty() { &self.noise } else { &self.shared };
        let words: Vec<&str> = (0..len).map(|_| pool.choose(rng).expect("words").as_str()).collect();
        words.join(" ")
    }
}

/// Generated posts, profiles and the word lists and tables that go with
/// them.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub profiles: Vec<Profile>,
    pub gazetteer: Gazetteer,
    /// Highest in-degree accounts of each side, control first.
    pub anchors: Vec<(String, Side)>,
    pub hate_terms: Vec<String>,
    /// Sorted by word; scores on a 1..9 scale.
    pub sentiment: Vec<(String, f64)>,
    pub categories: Vec<(String, Vec<String>)>,
    pub vocabulary: Vocabulary,
    pub hashtags: Vec<String>,
}

/// Bounding box of the `i`-th state code on an 8-column grid.
pub(crate) fn state_box(i: usize) -> BoundingBox {
    let min_lat = 25.0 + 3.0 * (i / 8) as f64;
    let min_lon = -125.0 + 6.0 * (i % 8) as f64;
    BoundingBox {
        min_lat,
        min_lon,
        max_lat: min_lat + 2.5,
        max_lon: min_lon + 5.0,
    }
}

fn synth_gazetteer() -> Gazetteer {
    let mut g = Gazetteer::new();
    for (i, s) in StateCode::all().enumerate() {
        g.add_box(s, state_box(i));
        g.add_name(&format!("{} metro", s.as_str()), s);
        g.add_name(&format!("state of {}", s.as_str()), s);
    }
    g
}

fn state_index(s: StateCode) -> usize {
    StateCode::all().position(|x| x == s).expect("known state")
}

fn gps_point(s: StateCode, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let b = state_box(state_index(s));
    let round = |x: f64| (x * 1e5).round() / 1e5;
    (
        round(rng.random_range(b.min_lat + 0.25..b.max_lat - 0.25)),
        round(rng.random_range(b.min_lon + 0.25..b.max_lon - 0.25)),
    )
}

fn profile_location(s: StateCode, variant: usize) -> String {
    let code = s.as_str();
    match variant % 3 {
        0 => format!("{code} Metro"),
        1 => format!("State of {code}"),
        _ => format!("  {}   metro ", code.to_lowercase()),
    }
}

/// Number of top-volume accounts so that they are exactly the
/// `ceil(0.001 n)` accounts the volume filter removes.
fn top_volume_count(others: usize) -> usize {
    let mut k = 1;
    while k < ((others + k) as f64 * 0.001).ceil() as usize {
        k += 1;
    }
    k
}

struct Emitter<'a> {
    cfg: &'a SynthConfig,
    posts: Vec<Post>,
}

impl Emitter<'_> {
    fn push(&mut self, user: &str, text: String, rt: Option<&str>, hashtags: Vec<String>, gps: Option<(f64, f64)>, english: bool, rng: &mut ChaCha8Rng) {
        let id = format!("p{:08}", self.posts.len());
        self.posts.push(Post {
            post_id: id,
            user_id: user.to_string(),
            timestamp: rng.random_range(self.cfg.window_start..self.cfg.window_end),
            text,
            retweeted_user_id: rt.map(str::to_string),
            hashtags,
            lat: gps.map(|g| g.0),
            lon: gps.map(|g| g.1),
            is_english: english,
        });
    }
}

/// Posts and profiles consistent with `graph` and the planted truth.
///
/// Network accounts write between `tweets_min` and `tweets_max` original
/// posts drawn from their class vocabulary, one hashtag each from a
/// personal pool whose size grows with the activism trait, and retweet
/// every out-neighbor as many times as the edge weight. A few extra
/// one-off retweets go to random non-neighbors. Extra accounts are
/// appended that each fail exactly one account filter; their expected
/// rule is recorded in the returned truth.
pub fn generate_corpus(
    cfg: &SynthConfig,
    graph: &EndorsementGraph,
    mut truth: GroundTruth,
    seed: u64,
) -> Result<(Corpus, GroundTruth), SynthError> {
    cfg.validate()?;
    let vocabulary = Vocabulary::build(cfg, &mut stage_rng(seed, 10));
    let hashtags: Vec<String> = (0..cfg.hashtag_pool).map(|k| format!("tag{k:02}")).collect();
    let mut em = Emitter {
        cfg,
        posts: Vec::new(),
    };
    let mut profiles = Vec::new();
    let mut rng = stage_rng(seed, 11);
    let followers = LogNormal::new(400f64.ln(), 1.0).expect("valid");
    let friends = LogNormal::new(300f64.ln(), 0.8).expect("valid");
    let n = truth.users.len();

    for u in 0..n {
        let ut = truth.users[u].clone();
        let side = ut.side.ok_or_else(|| SynthError::Config("network user without a side".into()))?;
        let state = ut.state.ok_or_else(|| SynthError::Config("network user without a state".into()))?;
        let pool_size = (2f64.powf(2.0 + 1.2 * ut.activism).round() as usize).clamp(1, hashtags.len());
        let pool: Vec<&String> = index::sample(&mut rng, hashtags.len(), pool_size)
            .into_iter()
            .map(|k| &hashtags[k])
            .collect();
        let n_orig = rng.random_range(cfg.tweets_min..=cfg.tweets_max);
        for k in 0..n_orig {
            let text = vocabulary.sentence(side, cfg.tokens_per_tweet, cfg.token_noise, &mut rng);
            let tag = (*pool.choose(&mut rng).expect("non-empty pool")).clone();
            let gps = (ut.located_by_gps && k < GPS_TWEETS).then(|| gps_point(state, &mut rng));
            let english = k == 0 || !rng.random_bool(cfg.non_english_rate);
            em.push(&ut.user_id, text, None, vec![tag], gps, english, &mut rng);
        }
        let gi = graph.index_of(&ut.user_id);
        let out = gi.map(|i| graph.out_edges(i)).unwrap_or(&[]);
        for &(v, w) in out {
            let target = graph.id(v);
            let tside = truth.users[v].side.unwrap_or(side);
            for _ in 0..w {
                let text = format!(
                    "RT @{target}: {}",
                    vocabulary.sentence(tside, cfg.tokens_per_tweet, cfg.token_noise, &mut rng)
                );
                em.push(&ut.user_id, text, Some(target), Vec::new(), None, true, &mut rng);
            }
        }
        if n > 1 {
            let linked: BTreeSet<usize> = out.iter().map(|e| e.0).collect();
            let mut chosen = BTreeSet::new();
            let mut tries = 0;
            while chosen.len() < cfg.one_off_retweets && tries < 20 * cfg.one_off_retweets {
                tries += 1;
                let v = rng.random_range(0..n);
                if v != u && !linked.contains(&v) && chosen.insert(v) {
                    let target = &truth.users[v].user_id;
                    let tside = truth.users[v].side.unwrap_or(side);
                    let text = format!(
                        "RT @{target}: {}",
                        vocabulary.sentence(tside, cfg.tokens_per_tweet, cfg.token_noise, &mut rng)
                    );
                    em.push(&ut.user_id, text, Some(target), Vec::new(), None, true, &mut rng);
                }
            }
        }
        let fo = (followers.sample(&mut rng).round() as u64).max(5);
        let fr = (friends.sample(&mut rng).round() as u64).clamp(5, 10 * fo);
        let total = em.posts.iter().rev().take_while(|p| p.user_id == ut.user_id).count() as u64;
        profiles.push(Profile {
            user_id: ut.user_id.clone(),
            followers: fo,
            friends: fr,
            created_ts: cfg.window_end - rng.random_range(400..3000) * DAY,
            location: if ut.located_by_gps {
                String::new()
            } else {
                profile_location(state, u)
            },
            statuses_count: Some(total + rng.random_range(100..20_000)),
        });
    }

    let states: Vec<StateCode> = StateCode::all().collect();
    let n_other = (cfg.violation_rate * n as f64 / (1.0 - cfg.violation_rate)).round() as usize;
    let n_top = top_volume_count(n + n_other);
    let mut rng = stage_rng(seed, 12);
    for k in 0..n_top + n_other {
        let id = user_id(n + k);
        let rule = if k < n_top {
            FilterRule::TopVolume
        } else {
            ROTATING_RULES[(k - n_top) % ROTATING_RULES.len()]
        };
        let home = *states.choose(&mut rng).expect("states");
        let mut tweets = rng.random_range(3..=10usize);
        let mut fo = rng.random_range(50..500u64);
        let mut fr = rng.random_range(50..500u64);
        let mut age_days = rng.random_range(400..3000i64);
        let mut english = true;
        let mut location = profile_location(home, k);
        let mut gps_states: Vec<StateCode> = Vec::new();
        let mut state = Some(home);
        match rule {
            FilterRule::TopVolume => tweets = 1000 + 10 * (n_top - k),
            FilterRule::SingleTweet => tweets = 1,
            FilterRule::FewFollowersOrFriends => fo = 3,
            FilterRule::FriendRatio => {
                fo = 10;
                fr = 150;
            }
            FilterRule::YoungAccount => age_days = 100,
            FilterRule::NoEnglishTweet => english = false,
            FilterRule::UnresolvedState => {
                location = "the moon".into();
                state = None;
            }
            FilterRule::FewStateTweets => {
                location = String::new();
                let pair = index::sample(&mut rng, states.len(), 2);
                gps_states = pair.into_iter().map(|i| states[i]).collect();
                gps_states.sort();
                state = Some(gps_states[0]);
            }
        }
        for t in 0..tweets {
            let gps = gps_states.get(t).map(|&s| gps_point(s, &mut rng));
            let text = vocabulary.neutral_sentence(cfg.tokens_per_tweet, &mut rng);
            em.push(&id, text, None, Vec::new(), gps, english, &mut rng);
        }
        profiles.push(Profile {
            user_id: id.clone(),
            followers: fo,
            friends: fr,
            created_ts: cfg.window_end - age_days * DAY,
            location,
            statuses_count: Some(tweets as u64 + rng.random_range(100..20_000)),
        });
        truth.users.push(UserTruth {
            user_id: id,
            side: None,
            state,
            attended: false,
            activism: 0.0,
            located_by_gps: !gps_states.is_empty(),
            expected_rule: Some(rule),
        });
    }
    truth.users.sort_by(|a, b| a.user_id.cmp(&b.user_id));

    let mut anchors = Vec::new();
    for side in [Side::Control, Side::Rights] {
        let mut ranked: Vec<(usize, &str)> = (0..graph.node_count())
            .filter(|&i| truth.get(graph.id(i)).and_then(|t| t.side) == Some(side))
            .map(|i| (graph.in_degree(i), graph.id(i)))
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        anchors.extend(ranked.iter().take(cfg.anchors_per_side).map(|(_, id)| (id.to_string(), side)));
    }

    let mut rng = stage_rng(seed, 13);
    let hate_terms: Vec<String> = vocabulary
        .classes
        .iter()
        .flat_map(|c| c.iter().filter(|w| !vocabulary.shared.contains(w)).skip(7).step_by(15))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let all_words: BTreeSet<&String> = vocabulary.classes.iter().flatten().chain(&vocabulary.noise).collect();
    let sentiment = all_words
        .into_iter()
        .map(|w| (w.clone(), (rng.random_range(1.0..9.0f64) * 100.0).round() / 100.0))
        .collect();

    let corpus = Corpus {
        posts: em.posts,
        profiles,
        gazetteer: synth_gazetteer(),
        anchors,
        hate_terms,
        sentiment,
        categories: default_categories(),
        vocabulary,
        hashtags,
    };
    Ok((corpus, truth))
}

/// A small category dictionary over the synthetic vocabulary.
fn default_categories() -> Vec<(String, Vec<String>)> {
    let cats: [(&str, &[&str]); 8] = [
        ("posemo", &["freedom", "liberty", "gen01*", "misc00*"]),
        ("negemo", &["shooting", "assault", "ctl02*", "rts02*"]),
        ("anger", &["enough", "ban", "ctl03*", "rts03*"]),
        ("i", &["gen02*", "misc01*"]),
        ("we", &["gen03*", "misc02*"]),
        ("social", &["people", "kids", "police", "gen04*"]),
        ("swear", &["ctl05*", "rts05*"]),
        ("conj", &["gen05*", "misc03*"]),
    ];
    cats.iter()
        .map(|(c, ps)| (c.to_string(), ps.iter().map(|p| p.to_string()).collect()))
        .collect()
}
