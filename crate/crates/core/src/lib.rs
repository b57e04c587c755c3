//! Endorsement-graph stance detection, polarization features and
//! engagement modeling for issue-focused social media corpora.
//!
//! The crate is organized bottom-up:
//!
//! - [`ingest`]: line-delimited post/profile parsing, per-user aggregation,
//!   offline geolocation and the account-quality filters.
//! - [`graph`]: the weighted retweet (endorsement) graph and its subgraphs.
//! - [`partition`]: multilevel bisection, ensemble polarity scores,
//!   modularity, Louvain and anchor-based side labeling.
//! - [`text`]: tokenization, Naive Bayes stance classification, log-odds
//!   term comparison and lexicon/category scoring.
//! - [`features`]: state-level and user-level feature tables.
//! - [`stats`]: feature selection, OLS, classifiers and cross-validation.
//! - [`synth`]: synthetic corpora and panels with planted ground truth.

pub mod features;
pub mod graph;
pub mod ingest;
pub mod partition;
pub mod stats;
pub mod synth;
pub mod text;

pub use graph::{EndorsementGraph, NodeSet};
pub use ingest::{Post, StateCode, UserRecord};
pub use partition::{PolarityScores, Side, SideLabels};
