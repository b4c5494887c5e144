//! Corpus analytics for abusive replies to politicians.
//!
//! The crate ingests tweet reply streams (JSON-lines), classifies each reply
//! with a rule-based compositional lexicon (slurs, offensive words, identity
//! terms), resolves who the abuse is aimed at, attributes replies to the
//! political topics of the tweet they answer, and computes aggregate and
//! temporal statistics: per-MP summaries, group significance tests, monthly
//! trends, and burstiness metrics (focus windows, churn, Gini).
//!
//! Modules follow the pipeline order:
//!
//! - [`corpus_ingest`]: tweet/registry parsing, reply linking, daily series
//! - [`lexicon`]: term lists, token normalization, hashtag segmentation, and
//!   the compiled multi-pattern matcher
//! - [`abuse_engine`]: tokenization, composition rules, target resolution
//! - [`topic_engine`]: topic detection on MP-authored tweets
//! - [`stats`]: per-MP summaries, Mann-Whitney / Fisher exact tests,
//!   topic heatmap, monthly trend
//! - [`temporal`]: focus, churn, Gini, burstiness box-plot report
//! - [`eval_harness`]: accuracy/precision/recall/F1 against labeled data
//! - [`cli`]: subcommand dispatch and deterministic report emission
//!
//! Everything downstream of ingestion is pure and deterministic for a fixed
//! lexicon: the same corpus produces byte-identical reports regardless of
//! worker count.

pub mod abuse_engine;
pub mod cli;
pub mod corpus_ingest;
pub mod eval_harness;
pub mod lexicon;
pub mod pipeline;
pub mod stats;
pub mod temporal;
pub mod topic_engine;
