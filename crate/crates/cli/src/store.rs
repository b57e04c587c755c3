//! The compact user/post store written by `ingest` and read by every later
//! command.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use engage_core::graph::build_endorsement_graph;
use engage_core::ingest::{parse_posts, write_posts, Post, UserRecord};
use engage_core::EndorsementGraph;

const POSTS: &str = "posts.jsonl";
const USERS: &str = "users.jsonl";

/// Users that passed the filters, with their posts only.
#[derive(Debug, Clone, Default)]
pub struct Store {
    pub posts: Vec<Post>,
    /// `UserRecord::posts` index into `posts`.
    pub users: BTreeMap<String, UserRecord>,
}

impl Store {
    /// Keeps the posts and records of `kept` users and re-points the
    /// records' post indices at the shortened post list.
    pub fn from_filtered(posts: &[Post], users: &BTreeMap<String, UserRecord>, kept: &BTreeSet<String>) -> Self {
        let mut remap = vec![usize::MAX; posts.len()];
        let mut out_posts = Vec::new();
        for (i, p) in posts.iter().enumerate() {
            if kept.contains(&p.user_id) {
                remap[i] = out_posts.len();
                out_posts.push(p.clone());
            }
        }
        let users = users
            .iter()
            .filter(|(id, _)| kept.contains(*id))
            .map(|(id, u)| {
                let mut u = u.clone();
                u.posts = u.posts.iter().map(|&i| remap[i]).collect();
                (id.clone(), u)
            })
            .collect();
        Store {
            posts: out_posts,
            users,
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.users.keys().cloned().collect()
    }

    pub fn kept(&self) -> BTreeSet<String> {
        self.users.keys().cloned().collect()
    }

    pub fn graph(&self, min_weight: u64) -> EndorsementGraph {
        build_endorsement_graph(&self.posts, &self.kept(), min_weight)
    }

    /// Original (non-retweet) texts per user, in post order.
    pub fn original_texts(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = self.users.keys().map(|k| (k.as_str(), Vec::new())).collect();
        for p in self.posts.iter().filter(|p| !p.is_retweet()) {
            if let Some(v) = out.get_mut(p.user_id.as_str()) {
                v.push(&p.text);
            }
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(POSTS))?);
        write_posts(&mut w, &self.posts)?;
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join(USERS))?);
        for u in self.users.values() {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            let p = dir.join(name);
            File::open(&p)
                .map(BufReader::new)
                .with_context(|| format!("opening {} (run `engage ingest` first)", p.display()))
        };
        let parsed = parse_posts(open(POSTS)?)?;
        if parsed.skipped > 0 {
            bail!("ingest store {} has {} unreadable post lines", dir.display(), parsed.skipped);
        }
        let mut users = BTreeMap::new();
        for (i, line) in open(USERS)?.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let u: UserRecord =
                serde_json::from_str(&line).with_context(|| format!("ingest store users line {}", i + 1))?;
            if u.posts.iter().any(|&k| k >= parsed.records.len()) {
                bail!("ingest store user {} points past the post list", u.user_id);
            }
            users.insert(u.user_id.clone(), u);
        }
        Ok(Store {
            posts: parsed.records,
            users,
        })
    }
}
