//! Post and profile ingestion.
//!
//! Posts and profiles arrive as line-delimited JSON. Malformed lines are
//! logged and counted, never fatal. Posts are aggregated into per-user
//! records, each user is resolved to a U.S. state through an offline
//! [`Gazetteer`], and the account-quality filters in [`filter`] decide which
//! users enter the analysis.

mod filter;
mod gazetteer;

pub use filter::{apply_filters, apply_filters_frozen, FilterOutcome, FilterReport, FilterRule, VolumeCutoff};
pub use gazetteer::{normalize_location, BoundingBox, Gazetteer, GazetteerError};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The 50 states plus DC, sorted.
pub const STATE_CODES: [&str; 51] = [
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN", "KS",
    "KY", "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV",
    "NY", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid state code {0:?}")]
    InvalidState(String),
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Two-letter code of a U.S. state or DC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateCode(&'static str);

impl StateCode {
    pub fn as_str(&self) -> &'static str {
        self.0
    }

    pub fn all() -> impl Iterator<Item = StateCode> {
        STATE_CODES.iter().map(|s| StateCode(s))
    }
}

impl FromStr for StateCode {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        STATE_CODES
            .binary_search(&upper.as_str())
            .map(|i| StateCode(STATE_CODES[i]))
            .map_err(|_| IngestError::InvalidState(s.to_string()))
    }
}

impl fmt::Display for StateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl Serialize for StateCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0)
    }
}

impl<'de> Deserialize<'de> for StateCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Wire format of one post line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostLine {
    pub id: String,
    pub user_id: String,
    pub ts: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt_user_id: Option<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// One social-media message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub text: String,
    pub retweeted_user_id: Option<String>,
    /// Lowercase, without the leading '#'.
    pub hashtags: Vec<String>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub is_english: bool,
}

impl Post {
    pub fn gps(&self) -> Option<(f64, f64)> {
        match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            _ => None,
        }
    }

    pub fn is_retweet(&self) -> bool {
        self.retweeted_user_id.is_some()
    }

    fn from_line(line: PostLine) -> Result<Self, String> {
        if line.id.is_empty() || line.user_id.is_empty() {
            return Err("empty id or user_id".into());
        }
        if let Some(lat) = line.lat {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(format!("latitude {lat} out of range"));
            }
        }
        if let Some(lon) = line.lon {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(format!("longitude {lon} out of range"));
            }
        }
        let hashtags = line
            .hashtags
            .iter()
            .map(|h| h.trim_start_matches('#').to_lowercase())
            .filter(|h| !h.is_empty())
            .collect();
        let retweeted_user_id = line.rt_user_id.filter(|s| !s.is_empty());
        Ok(Post {
            post_id: line.id,
            user_id: line.user_id,
            timestamp: line.ts,
            text: line.text,
            retweeted_user_id,
            hashtags,
            lat: line.lat,
            lon: line.lon,
            is_english: line.lang.as_deref().is_some_and(|l| l.eq_ignore_ascii_case("en")),
        })
    }

    pub fn to_line(&self) -> PostLine {
        PostLine {
            id: self.post_id.clone(),
            user_id: self.user_id.clone(),
            ts: self.timestamp,
            text: self.text.clone(),
            rt_user_id: self.retweeted_user_id.clone(),
            hashtags: self.hashtags.clone(),
            lat: self.lat,
            lon: self.lon,
            lang: Some(if self.is_english { "en" } else { "und" }.to_string()),
        }
    }
}

/// Result of reading a line-delimited stream.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    /// Lines that could not be decoded or failed validation.
    pub skipped: usize,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            skipped: 0,
        }
    }
}

/// Parses line-delimited post records. Bad lines are skipped with a warning;
/// only a failing reader aborts.
pub fn parse_posts<R: BufRead>(reader: R) -> Result<Parsed<Post>, IngestError> {
    let mut out = Parsed::default();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post = serde_json::from_str::<PostLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(Post::from_line);
        match post {
            Ok(p) if seen.insert(p.post_id.clone()) => out.records.push(p),
            Ok(p) => {
                log::warn!("posts line {}: duplicate post id {}", lineno + 1, p.post_id);
                out.skipped += 1;
            }
            Err(e) => {
                log::warn!("posts line {}: {}", lineno + 1, e);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

pub fn write_posts<W: Write>(mut w: W, posts: &[Post]) -> Result<(), IngestError> {
    for p in posts {
        serde_json::to_writer(&mut w, &p.to_line())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Account metadata for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: String,
    pub followers: u64,
    pub friends: u64,
    pub created_ts: i64,
    #[serde(default)]
    pub location: String,
    /// Lifetime status count, when the source exposes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statuses_count: Option<u64>,
}

pub fn parse_profiles<R: BufRead>(reader: R) -> Result<Parsed<Profile>, IngestError> {
    let mut out = Parsed::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Profile>(&line) {
            Ok(p) if !p.user_id.is_empty() => out.records.push(p),
            Ok(_) => {
                log::warn!("profiles line {}: empty user_id", lineno + 1);
                out.skipped += 1;
            }
            Err(e) => {
                log::warn!("profiles line {}: {}", lineno + 1, e);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

pub fn write_profiles<W: Write>(mut w: W, profiles: &[Profile]) -> Result<(), IngestError> {
    for p in profiles {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// How a user's state was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSource {
    Gps,
    Profile,
}

/// Per-user aggregate over the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub tweet_count: u64,
    /// `None` when no profile was supplied for the user.
    pub followers_count: Option<u64>,
    pub friends_count: Option<u64>,
    pub account_created: Option<i64>,
    pub location_string: Option<String>,
    pub statuses_count: Option<u64>,
    pub resolved_state: Option<StateCode>,
    pub state_source: Option<StateSource>,
    /// Indices into the post slice the record was built from, in input order.
    pub posts: Vec<usize>,
    pub english_tweet_count: u64,
    /// Posts whose GPS fix falls inside a state's bounding box.
    pub per_state_tweet_counts: BTreeMap<StateCode, u64>,
}

impl UserRecord {
    pub fn new(user_id: &str) -> Self {
        UserRecord {
            user_id: user_id.to_string(),
            tweet_count: 0,
            followers_count: None,
            friends_count: None,
            account_created: None,
            location_string: None,
            statuses_count: None,
            resolved_state: None,
            state_source: None,
            posts: Vec::new(),
            english_tweet_count: 0,
            per_state_tweet_counts: BTreeMap::new(),
        }
    }

    pub fn has_profile(&self) -> bool {
        self.followers_count.is_some()
    }

    /// Tweets attributable to the resolved state: every tweet for
    /// profile-resolved users, GPS hits inside the state otherwise.
    pub fn tweets_in_resolved_state(&self) -> u64 {
        match (self.resolved_state, self.state_source) {
            (Some(_), Some(StateSource::Profile)) => self.tweet_count,
            (Some(s), Some(StateSource::Gps)) => self.per_state_tweet_counts.get(&s).copied().unwrap_or(0),
            _ => 0,
        }
    }
}

/// Groups posts by author and attaches profile metadata. Users with posts
/// but no profile keep `None` profile fields; profiles without posts are
/// ignored. Duplicate profiles: the last one wins.
pub fn aggregate_users(posts: &[Post], profiles: &[Profile], gaz: &Gazetteer) -> BTreeMap<String, UserRecord> {
    let mut users: BTreeMap<String, UserRecord> = BTreeMap::new();
    for (i, post) in posts.iter().enumerate() {
        let rec = users
            .entry(post.user_id.clone())
            .or_insert_with(|| UserRecord::new(&post.user_id));
        rec.tweet_count += 1;
        rec.posts.push(i);
        if post.is_english {
            rec.english_tweet_count += 1;
        }
        if let Some(state) = post.gps().and_then(|(lat, lon)| gaz.locate(lat, lon)) {
            *rec.per_state_tweet_counts.entry(state).or_insert(0) += 1;
        }
    }
    let mut seen = HashSet::new();
    for p in profiles {
        if !seen.insert(p.user_id.as_str()) {
            log::warn!("duplicate profile for {}; keeping the last one", p.user_id);
        }
        if let Some(rec) = users.get_mut(&p.user_id) {
            rec.followers_count = Some(p.followers);
            rec.friends_count = Some(p.friends);
            rec.account_created = Some(p.created_ts);
            rec.location_string = Some(p.location.clone());
            rec.statuses_count = p.statuses_count;
        }
    }
    users
}

/// Resolves a user to a state. GPS evidence wins: the state holding most of
/// the user's geotagged posts (ties to the smaller code). Otherwise the
/// profile location is looked up in the gazetteer.
pub fn resolve_state(user: &UserRecord, posts: &[&Post], gaz: &Gazetteer) -> Option<(StateCode, StateSource)> {
    let mut hits: BTreeMap<StateCode, u64> = BTreeMap::new();
    for p in posts {
        if let Some(s) = p.gps().and_then(|(lat, lon)| gaz.locate(lat, lon)) {
            *hits.entry(s).or_insert(0) += 1;
        }
    }
    // BTreeMap iterates in code order; max_by_key keeps the last max, so reverse.
    if let Some((state, _)) = hits.iter().rev().max_by_key(|(_, &c)| c) {
        return Some((*state, StateSource::Gps));
    }
    user.location_string
        .as_deref()
        .and_then(|loc| gaz.lookup_name(loc))
        .map(|s| (s, StateSource::Profile))
}

/// Runs [`resolve_state`] for every user and stores the result.
pub fn resolve_all(users: &mut BTreeMap<String, UserRecord>, posts: &[Post], gaz: &Gazetteer) {
    for rec in users.values_mut() {
        let own: Vec<&Post> = rec.posts.iter().map(|&i| &posts[i]).collect();
        let resolved = resolve_state(rec, &own, gaz);
        rec.resolved_state = resolved.map(|r| r.0);
        rec.state_source = resolved.map(|r| r.1);
    }
}
