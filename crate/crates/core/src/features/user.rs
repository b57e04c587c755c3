use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix, Provenance};
use crate::ingest::{Post, StateCode, UserRecord};
use crate::text::{
    category_rates, lexicon_rate, sentiment_avg, shannon_entropy, tokenize, CategoryDictionary, Lexicon, Stopwords,
    TokenDoc,
};

const DAY: f64 = 86_400.0;

/// Collection window in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn days(&self) -> f64 {
        ((self.end - self.start) as f64 / DAY).max(1.0)
    }
}

/// Word lists used by the content features.
#[derive(Debug, Clone, Default)]
pub struct ContentResources {
    pub stopwords: Stopwords,
    pub hate: Lexicon,
    pub sentiment: Lexicon,
    pub categories: CategoryDictionary,
}

pub type UserFeatureRow = Vec<(String, Provenance, Option<f64>)>;

fn content_columns<'a>(
    posts: impl Iterator<Item = &'a Post>,
    res: &ContentResources,
    with_liwc: bool,
    row: &mut UserFeatureRow,
) {
    let mut rt: HashMap<&str, u64> = HashMap::new();
    let mut tags: HashMap<&str, u64> = HashMap::new();
    let mut tokens = Vec::new();
    for p in posts {
        if let Some(src) = &p.retweeted_user_id {
            *rt.entry(src).or_insert(0) += 1;
        }
        for h in &p.hashtags {
            *tags.entry(h).or_insert(0) += 1;
        }
        tokens.extend(tokenize(&p.text, &res.stopwords));
    }
    let doc = TokenDoc::new("", tokens);
    let vocab = doc.counts();
    let mut push = |name: &str, v: Option<f64>| row.push((name.to_string(), Provenance::Content, v));
    push("con_rt_count", Some(rt.values().sum::<u64>() as f64));
    push("con_rt_entropy", Some(shannon_entropy(rt.values().copied())));
    push("con_hashtag_count", Some(tags.values().sum::<u64>() as f64));
    push("con_hashtag_entropy", Some(shannon_entropy(tags.values().copied())));
    push("con_voca", Some(vocab.len() as f64));
    push("con_voca_2", Some(shannon_entropy(vocab.values().copied())));
    push("con_hateword", Some(lexicon_rate(&doc, &res.hate)));
    push("con_sentiment", sentiment_avg(&doc, &res.sentiment));
    if with_liwc {
        for (cat, rate) in category_rates(&doc, &res.categories) {
            row.push((format!("liwc_{cat}"), Provenance::Liwc, Some(rate)));
        }
    }
}

fn behavior_columns(user: &UserRecord, window: Window, row: &mut UserFeatureRow) {
    let age_days = user.account_created.map(|c| (window.end - c) as f64 / DAY);
    let followers = user.followers_count.map(|f| f as f64);
    let friends = user.friends_count.map(|f| f as f64);
    let ratio = followers.zip(friends).and_then(|(a, b)| (b > 0.0).then(|| a / b));
    let all_rate = user
        .statuses_count
        .zip(age_days)
        .and_then(|(s, d)| (d > 0.0).then(|| s as f64 / d));
    let mut push = |name: &str, v: Option<f64>| row.push((name.to_string(), Provenance::Behavior, v));
    push("twt_userfollowerscount", followers);
    push("twt_userfriendscount", friends);
    push("twt_followerfriendratio", ratio);
    push("twt_accage", age_days);
    push("twt_guntweetrate", Some(user.tweet_count as f64 / window.days()));
    push("twt_alltweetrate", all_rate);
    push("twt_guntweetcnt", Some(user.tweet_count as f64));
    push("twt_engtweetcnt", Some(user.english_tweet_count as f64));
}

/// Content, behavior and category-rate features of one user over all of
/// the user's posts (`posts` is the slice the record was aggregated from).
/// Column order is fixed; category columns follow dictionary order with a
/// `liwc_` prefix.
pub fn user_content_behavior_features(
    user: &UserRecord,
    posts: &[Post],
    res: &ContentResources,
    window: Window,
) -> UserFeatureRow {
    let mut row = Vec::new();
    content_columns(user.posts.iter().map(|&i| &posts[i]), res, true, &mut row);
    behavior_columns(user, window, &mut row);
    row
}

/// State-level content and behavior rows. Content features pool the posts
/// of all the state's users; behavior features average the users' values
/// (missing values skipped). States without users get missing cells except
/// for the zero counts.
pub fn state_content_behavior_features(
    users: &BTreeMap<String, UserRecord>,
    members: &[String],
    posts: &[Post],
    res: &ContentResources,
    window: Window,
    states: &[StateCode],
) -> Result<FeatureMatrix, FeatureError> {
    let mut by_state: BTreeMap<StateCode, Vec<&UserRecord>> = BTreeMap::new();
    for id in members {
        if let Some(u) = users.get(id) {
            if let Some(s) = u.resolved_state {
                by_state.entry(s).or_default().push(u);
            }
        }
    }
    let mut rows: Vec<(String, UserFeatureRow)> = Vec::with_capacity(states.len());
    for st in states {
        let us = by_state.get(st).map(Vec::as_slice).unwrap_or(&[]);
        let mut row = Vec::new();
        content_columns(
            us.iter().flat_map(|u| u.posts.iter().map(|&i| &posts[i])),
            res,
            false,
            &mut row,
        );
        let per_user: Vec<UserFeatureRow> = us
            .iter()
            .map(|u| {
                let mut r = Vec::new();
                behavior_columns(u, window, &mut r);
                r
            })
            .collect();
        let mut template = Vec::new();
        behavior_columns(&UserRecord::new(""), window, &mut template);
        for (j, (name, prov, _)) in template.into_iter().enumerate() {
            let vals: Vec<f64> = per_user.iter().filter_map(|r| r[j].2).collect();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            row.push((name, prov, mean));
        }
        if us.is_empty() {
            for cell in row.iter_mut().filter(|c| c.0 != "con_rt_count" && c.0 != "con_hashtag_count") {
                cell.2 = None;
            }
        }
        rows.push((st.to_string(), row));
    }
    FeatureMatrix::from_rows(rows.iter().map(|(k, r)| (k.clone(), r.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, text: &str, rt: Option<&str>, tags: &[&str]) -> Post {
        Post {
            post_id: id.into(),
            user_id: "u".into(),
            timestamp: 0,
            text: text.into(),
            retweeted_user_id: rt.map(String::from),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            lat: None,
            lon: None,
            is_english: true,
        }
    }

    fn value(row: &UserFeatureRow, name: &str) -> Option<f64> {
        row.iter().find(|c| c.0 == name).unwrap().2
    }

    #[test]
    fn hand_computed_row() {
        let posts = vec![
            post("1", "guns kill kids", None, &["neveragain", "enough"]),
            post("2", "guns save lives", Some("nra"), &["2a"]),
            post("3", "happy kids", Some("nra"), &["neveragain"]),
            post("4", "ban guns", Some("moms"), &[]),
        ];
        let mut user = UserRecord::new("u");
        user.posts = vec![0, 1, 2, 3];
        user.tweet_count = 4;
        user.english_tweet_count = 3;
        user.followers_count = Some(50);
        user.friends_count = Some(20);
        user.account_created = Some(1_000 * 86_400);
        user.statuses_count = Some(3_000);
        let res = ContentResources {
            stopwords: Stopwords::none(),
            hate: Lexicon::from_terms(["kill", "ban"]),
            sentiment: Lexicon::from_scores([("happy", 8.0), ("kill", 1.0), ("lives", 6.0)]),
            categories: CategoryDictionary::from_pairs(&[("posemo", &["happy", "sav*"][..])]).unwrap(),
        };
        let window = Window {
            start: 1_490 * 86_400,
            end: 1_500 * 86_400,
        };
        let row = user_content_behavior_features(&user, &posts, &res, window);
        // Retweets: nra x2, moms x1.
        assert_eq!(value(&row, "con_rt_count"), Some(3.0));
        let h_rt = -(2.0 / 3.0f64) * (2.0 / 3.0f64).log2() - (1.0 / 3.0f64) * (1.0 / 3.0f64).log2();
        assert!((value(&row, "con_rt_entropy").unwrap() - h_rt).abs() < 1e-12);
        // Hashtags: neveragain x2, enough, 2a.
        assert_eq!(value(&row, "con_hashtag_count"), Some(4.0));
        assert!((value(&row, "con_hashtag_entropy").unwrap() - 1.5).abs() < 1e-12);
        // Tokens: guns x3, kids x2, kill, save, lives, happy, ban -> 10 tokens, 7 types.
        assert_eq!(value(&row, "con_voca"), Some(7.0));
        let h_voc = {
            let c = [3.0f64, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
            -c.iter().map(|x| (x / 10.0) * (x / 10.0).log2()).sum::<f64>()
        };
        assert!((value(&row, "con_voca_2").unwrap() - h_voc).abs() < 1e-12);
        assert_eq!(value(&row, "con_hateword"), Some(0.2));
        assert_eq!(value(&row, "con_sentiment"), Some(5.0));
        assert_eq!(value(&row, "liwc_posemo"), Some(0.2));
        assert_eq!(value(&row, "twt_followerfriendratio"), Some(2.5));
        assert_eq!(value(&row, "twt_accage"), Some(500.0));
        assert_eq!(value(&row, "twt_guntweetrate"), Some(0.4));
        assert_eq!(value(&row, "twt_alltweetrate"), Some(6.0));
        assert_eq!(value(&row, "twt_engtweetcnt"), Some(3.0));
    }

    #[test]
    fn degenerate_entropies() {
        let posts: Vec<Post> = (0..4).map(|i| post(&i.to_string(), "x", Some("src"), &[])).collect();
        let mut user = UserRecord::new("u");
        user.posts = vec![0, 1, 2, 3];
        let row = user_content_behavior_features(&user, &posts, &ContentResources::default(), Window { start: 0, end: 1 });
        assert_eq!(value(&row, "con_rt_entropy"), Some(0.0));
        assert_eq!(value(&row, "con_sentiment"), None);
        assert_eq!(value(&row, "twt_accage"), None);
    }
}
