use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::UserRecord;

const SECONDS_PER_DAY: i64 = 86_400;
const MIN_ACCOUNT_AGE_DAYS: i64 = 365;
const TOP_VOLUME_FRACTION: f64 = 0.001;

/// The account filters, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    SingleTweet,
    TopVolume,
    FewFollowersOrFriends,
    FriendRatio,
    YoungAccount,
    NoEnglishTweet,
    UnresolvedState,
    FewStateTweets,
}

impl FilterRule {
    pub const ALL: [FilterRule; 8] = [
        FilterRule::SingleTweet,
        FilterRule::TopVolume,
        FilterRule::FewFollowersOrFriends,
        FilterRule::FriendRatio,
        FilterRule::YoungAccount,
        FilterRule::NoEnglishTweet,
        FilterRule::UnresolvedState,
        FilterRule::FewStateTweets,
    ];
}

/// Exclusions attributed to the first rule each user failed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub single_tweet: usize,
    pub top_volume: usize,
    pub few_followers_or_friends: usize,
    pub friend_ratio: usize,
    pub young_account: usize,
    pub no_english_tweet: usize,
    pub unresolved_state: usize,
    pub few_state_tweets: usize,
    pub kept: usize,
}

impl FilterReport {
    pub fn excluded_by(&self, rule: FilterRule) -> usize {
        *self.slot(rule)
    }

    pub fn total_excluded(&self) -> usize {
        FilterRule::ALL.iter().map(|r| self.excluded_by(*r)).sum()
    }

    fn slot(&self, rule: FilterRule) -> &usize {
        match rule {
            FilterRule::SingleTweet => &self.single_tweet,
            FilterRule::TopVolume => &self.top_volume,
            FilterRule::FewFollowersOrFriends => &self.few_followers_or_friends,
            FilterRule::FriendRatio => &self.friend_ratio,
            FilterRule::YoungAccount => &self.young_account,
            FilterRule::NoEnglishTweet => &self.no_english_tweet,
            FilterRule::UnresolvedState => &self.unresolved_state,
            FilterRule::FewStateTweets => &self.few_state_tweets,
        }
    }

    fn bump(&mut self, rule: FilterRule) {
        let slot = match rule {
            FilterRule::SingleTweet => &mut self.single_tweet,
            FilterRule::TopVolume => &mut self.top_volume,
            FilterRule::FewFollowersOrFriends => &mut self.few_followers_or_friends,
            FilterRule::FriendRatio => &mut self.friend_ratio,
            FilterRule::YoungAccount => &mut self.young_account,
            FilterRule::NoEnglishTweet => &mut self.no_english_tweet,
            FilterRule::UnresolvedState => &mut self.unresolved_state,
            FilterRule::FewStateTweets => &mut self.few_state_tweets,
        };
        *slot += 1;
    }
}

/// Rank key of the last user removed by the top-volume rule. A user is
/// above the cutoff when it ranks at or before this key under
/// (tweet count descending, user id ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeCutoff {
    pub tweet_count: u64,
    pub user_id: String,
}

impl VolumeCutoff {
    fn covers(&self, u: &UserRecord) -> bool {
        u.tweet_count > self.tweet_count || (u.tweet_count == self.tweet_count && u.user_id <= self.user_id)
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: BTreeSet<String>,
    pub report: FilterReport,
    pub excluded: BTreeMap<String, FilterRule>,
    /// Frozen top-volume cutoff; pass it to [`apply_filters_frozen`] on re-runs.
    pub volume_cutoff: Option<VolumeCutoff>,
}

/// Applies the eight account filters with the top-volume cutoff computed
/// from this population: the `ceil(0.001 n)` highest-volume users go.
pub fn apply_filters(users: &BTreeMap<String, UserRecord>, window_end: i64) -> FilterOutcome {
    let n_top = (TOP_VOLUME_FRACTION * users.len() as f64).ceil() as usize;
    let mut ranked: Vec<&UserRecord> = users.values().collect();
    ranked.sort_by(|a, b| b.tweet_count.cmp(&a.tweet_count).then_with(|| a.user_id.cmp(&b.user_id)));
    let cutoff = n_top
        .checked_sub(1)
        .and_then(|last| ranked.get(last))
        .map(|u| VolumeCutoff {
            tweet_count: u.tweet_count,
            user_id: u.user_id.clone(),
        });
    apply_filters_frozen(users, window_end, cutoff.as_ref())
}

/// Applies the filters with a fixed top-volume cutoff (or none).
pub fn apply_filters_frozen(
    users: &BTreeMap<String, UserRecord>,
    window_end: i64,
    cutoff: Option<&VolumeCutoff>,
) -> FilterOutcome {
    let mut out = FilterOutcome {
        kept: BTreeSet::new(),
        report: FilterReport::default(),
        excluded: BTreeMap::new(),
        volume_cutoff: cutoff.cloned(),
    };
    for u in users.values() {
        match first_failure(u, window_end, cutoff) {
            Some(rule) => {
                out.report.bump(rule);
                out.excluded.insert(u.user_id.clone(), rule);
            }
            None => {
                out.kept.insert(u.user_id.clone());
            }
        }
    }
    out.report.kept = out.kept.len();
    out
}

fn first_failure(u: &UserRecord, window_end: i64, cutoff: Option<&VolumeCutoff>) -> Option<FilterRule> {
    if u.tweet_count < 2 {
        return Some(FilterRule::SingleTweet);
    }
    if cutoff.is_some_and(|c| c.covers(u)) {
        return Some(FilterRule::TopVolume);
    }
    let (followers, friends) = match (u.followers_count, u.friends_count) {
        (Some(fo), Some(fr)) if fo >= 5 && fr >= 5 => (fo, fr),
        _ => return Some(FilterRule::FewFollowersOrFriends),
    };
    if friends > 10 * followers {
        return Some(FilterRule::FriendRatio);
    }
    match u.account_created {
        Some(created) if window_end - created >= MIN_ACCOUNT_AGE_DAYS * SECONDS_PER_DAY => {}
        _ => return Some(FilterRule::YoungAccount),
    }
    if u.english_tweet_count < 1 {
        return Some(FilterRule::NoEnglishTweet);
    }
    if u.resolved_state.is_none() {
        return Some(FilterRule::UnresolvedState);
    }
    if u.tweets_in_resolved_state() < 2 {
        return Some(FilterRule::FewStateTweets);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::StateSource;

    const W: i64 = 1_600_000_000;

    fn ok_user(id: &str) -> UserRecord {
        let mut u = UserRecord::new(id);
        u.tweet_count = 3;
        u.english_tweet_count = 3;
        u.followers_count = Some(50);
        u.friends_count = Some(50);
        u.account_created = Some(W - 800 * SECONDS_PER_DAY);
        u.resolved_state = Some("NY".parse().unwrap());
        u.state_source = Some(StateSource::Profile);
        u
    }

    fn population(us: Vec<UserRecord>) -> BTreeMap<String, UserRecord> {
        us.into_iter().map(|u| (u.user_id.clone(), u)).collect()
    }

    #[test]
    fn empty_input() {
        let out = apply_filters(&BTreeMap::new(), W);
        assert!(out.kept.is_empty());
        assert_eq!(out.report, FilterReport::default());
        assert!(out.volume_cutoff.is_none());
    }

    #[test]
    fn single_tweet_rule() {
        let mut u = ok_user("a");
        u.tweet_count = 1;
        let out = apply_filters_frozen(&population(vec![u]), W, None);
        assert_eq!(out.excluded["a"], FilterRule::SingleTweet);
    }

    #[test]
    fn ratio_boundaries() {
        let mut over = ok_user("a");
        over.followers_count = Some(10);
        over.friends_count = Some(110);
        let mut exact = ok_user("b");
        exact.followers_count = Some(10);
        exact.friends_count = Some(100);
        let out = apply_filters_frozen(&population(vec![over, exact]), W, None);
        assert_eq!(out.excluded["a"], FilterRule::FriendRatio);
        assert!(out.kept.contains("b"));
    }

    #[test]
    fn follower_boundaries() {
        let mut four = ok_user("a");
        four.followers_count = Some(4);
        let mut five = ok_user("b");
        five.followers_count = Some(5);
        five.friends_count = Some(5);
        let out = apply_filters_frozen(&population(vec![four, five]), W, None);
        assert_eq!(out.excluded["a"], FilterRule::FewFollowersOrFriends);
        assert!(out.kept.contains("b"));
    }

    #[test]
    fn missing_profile_fails_follower_rule() {
        let mut u = UserRecord::new("a");
        u.tweet_count = 4;
        let out = apply_filters_frozen(&population(vec![u]), W, None);
        assert_eq!(out.excluded["a"], FilterRule::FewFollowersOrFriends);
    }

    #[test]
    fn top_volume_tie_break_by_id() {
        let mut us: Vec<UserRecord> = (0..1500).map(|i| ok_user(&format!("u{i:04}"))).collect();
        us[7].tweet_count = 99;
        us[3].tweet_count = 99;
        us[9].tweet_count = 50;
        let pop = population(us);
        let out = apply_filters(&pop, W);
        // ceil(1.5) = 2 users removed: the two 99s.
        assert_eq!(out.report.top_volume, 2);
        assert_eq!(out.excluded["u0003"], FilterRule::TopVolume);
        assert_eq!(out.excluded["u0007"], FilterRule::TopVolume);
        assert!(out.kept.contains("u0009"));
    }

    #[test]
    fn rerun_on_kept_set_is_identity() {
        let mut us: Vec<UserRecord> = (0..3000).map(|i| ok_user(&format!("u{i:04}"))).collect();
        for (i, u) in us.iter_mut().enumerate() {
            u.tweet_count = 2 + (i as u64 * 7919) % 113;
            u.english_tweet_count = (i % 5) as u64;
        }
        let pop = population(us);
        let first = apply_filters(&pop, W);
        let kept: BTreeMap<_, _> = pop
            .iter()
            .filter(|(k, _)| first.kept.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let second = apply_filters_frozen(&kept, W, first.volume_cutoff.as_ref());
        assert_eq!(second.kept, first.kept);
        assert_eq!(second.report.total_excluded(), 0);
    }
}
