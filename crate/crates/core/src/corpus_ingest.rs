//! Reading the tweet stream and the MP registry, and shaping them into the
//! structures the rest of the pipeline consumes.
//!
//! Tweets arrive as JSON lines. Replies are linked to the politicians they
//! answer through the registry; everything else is counted and dropped.
//! Linked replies can then be bucketed into per-MP daily series, the input
//! to all temporal analysis.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abuse_engine::Classification;

/// One tweet from the input stream. Handles are stored lowercased so
/// registry lookups never depend on how the author typed them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub author_handle: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub in_reply_to_handle: Option<String>,
    pub in_reply_to_id: Option<String>,
    pub is_retweet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "female" => Ok(Gender::Female),
            "male" => Ok(Gender::Male),
            other => Err(format!("unknown gender: {other}")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EthnicityGroup {
    White,
    Minority,
}

impl FromStr for EthnicityGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "white" => Ok(EthnicityGroup::White),
            "minority" => Ok(EthnicityGroup::Minority),
            other => Err(format!("unknown ethnicity_group: {other}")),
        }
    }
}

impl fmt::Display for EthnicityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EthnicityGroup::White => "white",
            EthnicityGroup::Minority => "minority",
        })
    }
}

/// One politician from the registry CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MPRecord {
    pub handle: String,
    pub display_name: String,
    pub party: String,
    pub gender: Gender,
    pub ethnicity_group: EthnicityGroup,
}

/// Per-MP daily counts over a fixed window. Both vectors always have the
/// same length (one slot per day) and abuse never exceeds replies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailySeries {
    pub handle: String,
    pub start_date: NaiveDate,
    pub abuse_counts: Vec<u32>,
    pub reply_counts: Vec<u32>,
}

impl DailySeries {
    pub fn new(
        handle: String,
        start_date: NaiveDate,
        abuse_counts: Vec<u32>,
        reply_counts: Vec<u32>,
    ) -> Result<DailySeries, IngestError> {
        if abuse_counts.is_empty() || abuse_counts.len() != reply_counts.len() {
            return Err(IngestError::BadSeries {
                handle,
                message: "count vectors must be non-empty and equal length".into(),
            });
        }
        if abuse_counts
            .iter()
            .zip(&reply_counts)
            .any(|(a, r)| a > r)
        {
            return Err(IngestError::BadSeries {
                handle,
                message: "abuse count exceeds reply count".into(),
            });
        }
        Ok(DailySeries {
            handle,
            start_date,
            abuse_counts,
            reply_counts,
        })
    }

    pub fn days(&self) -> usize {
        self.abuse_counts.len()
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed JSON at byte {offset}: {message}")]
    MalformedJson {
        line: u64,
        offset: usize,
        message: String,
    },
    #[error("line {line}: missing field {field}")]
    MissingField { line: u64, field: &'static str },
    #[error("line {line}: field {field}: {message}")]
    BadField {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: bad timestamp {value:?}: {message}")]
    BadTimestamp {
        line: u64,
        value: String,
        message: String,
    },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column {column}")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path} row {row}: duplicate handle {handle}")]
    DuplicateHandle {
        path: String,
        row: u64,
        handle: String,
    },
    #[error("{path} row {row}: {message}")]
    BadRegistryRow {
        path: String,
        row: u64,
        message: String,
    },
    #[error("invalid window: {start} is after {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("no classification for reply {id}")]
    MissingClassification { id: String },
    #[error("bad series for {handle}: {message}")]
    BadSeries { handle: String, message: String },
}

/// Parse one JSON line into a [`Tweet`].
///
/// `line_number` is 1-based and only used for error reporting. The three
/// failure modes are kept distinct because they are surfaced differently:
/// malformed JSON points at a byte offset, a missing or mistyped field is
/// named, and an unparseable timestamp echoes the offending value.
pub fn parse_tweet_line(line: &str, line_number: u64) -> Result<Tweet, IngestError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedJson {
            line: line_number,
            offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })?;

    let str_field = |field: &'static str| -> Result<String, IngestError> {
        match value.get(field) {
            None | Some(serde_json::Value::Null) => {
                Err(IngestError::MissingField {
                    line: line_number,
                    field,
                })
            }
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(IngestError::BadField {
                line: line_number,
                field,
                message: format!("expected a string, got {other}"),
            }),
        }
    };
    let opt_str_field = |field: &'static str| -> Result<Option<String>, IngestError> {
        match value.get(field) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(IngestError::BadField {
                line: line_number,
                field,
                message: format!("expected a string or null, got {other}"),
            }),
        }
    };

    let id = str_field("id")?;
    let author_handle = str_field("author_handle")?.to_lowercase();
    let created_raw = str_field("created_at")?;
    let created_at = DateTime::parse_from_rfc3339(&created_raw)
        .map_err(|e| IngestError::BadTimestamp {
            line: line_number,
            value: created_raw.clone(),
            message: e.to_string(),
        })?
        .with_timezone(&Utc);
    let text = str_field("text")?;
    let in_reply_to_handle = opt_str_field("in_reply_to_handle")?.map(|h| h.to_lowercase());
    let in_reply_to_id = opt_str_field("in_reply_to_id")?;
    let is_retweet = match value.get("is_retweet") {
        None | Some(serde_json::Value::Null) => {
            return Err(IngestError::MissingField {
                line: line_number,
                field: "is_retweet",
            });
        }
        Some(serde_json::Value::Bool(b)) => *b,
        Some(other) => {
            return Err(IngestError::BadField {
                line: line_number,
                field: "is_retweet",
                message: format!("expected a boolean, got {other}"),
            });
        }
    };

    Ok(Tweet {
        id,
        author_handle,
        created_at,
        text,
        in_reply_to_handle,
        in_reply_to_id,
        is_retweet,
    })
}

/// Load the MP registry CSV (`handle,display_name,party,gender,ethnicity_group`).
///
/// Handles are lowercased and must be unique afterwards; unknown gender or
/// ethnicity values are rejected rather than coerced.
pub fn load_registry(path: &Path) -> Result<BTreeMap<String, MPRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let col = |name: &'static str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(IngestError::MissingColumn {
                path: path.display().to_string(),
                column: name,
            })
    };
    let handle_col = col("handle")?;
    let name_col = col("display_name")?;
    let party_col = col("party")?;
    let gender_col = col("gender")?;
    let ethnicity_col = col("ethnicity_group")?;

    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2;
        let record = record.map_err(|source| IngestError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let bad = |message: String| IngestError::BadRegistryRow {
            path: path.display().to_string(),
            row,
            message,
        };
        let handle = record.get(handle_col).unwrap_or("").to_lowercase();
        if handle.is_empty() {
            return Err(bad("empty handle".into()));
        }
        let gender: Gender = record
            .get(gender_col)
            .unwrap_or("")
            .parse()
            .map_err(bad)?;
        let ethnicity_group: EthnicityGroup = record
            .get(ethnicity_col)
            .unwrap_or("")
            .parse()
            .map_err(bad)?;
        let mp = MPRecord {
            handle: handle.clone(),
            display_name: record.get(name_col).unwrap_or("").to_string(),
            party: record.get(party_col).unwrap_or("").to_string(),
            gender,
            ethnicity_group,
        };
        if out.insert(handle.clone(), mp).is_some() {
            return Err(IngestError::DuplicateHandle {
                path: path.display().to_string(),
                row,
                handle,
            });
        }
    }
    Ok(out)
}

/// The MP a tweet replies to, when it counts as a reply at all: retweets
/// never do, and the recipient must be in the registry.
pub fn reply_recipient<'a>(
    tweet: &Tweet,
    registry: &'a BTreeMap<String, MPRecord>,
) -> Option<&'a str> {
    if tweet.is_retweet {
        return None;
    }
    let handle = tweet.in_reply_to_handle.as_deref()?;
    registry.get(handle).map(|mp| mp.handle.as_str())
}

/// Tweets split by their role relative to the registry.
#[derive(Debug, Default)]
pub struct LinkedCorpus {
    /// Replies grouped by recipient. Every registry MP has an entry, even
    /// when nobody replied to them; values are sorted by (created_at, id)
    /// so the grouping does not depend on input order.
    pub replies_by_mp: BTreeMap<String, Vec<Tweet>>,
    /// Tweets authored by registry MPs (the source of reply topics).
    pub mp_authored: Vec<Tweet>,
    /// Tweets that were neither MP-authored nor replies to a registry MP.
    pub discarded: u64,
}

/// Split a batch of tweets by role. A tweet can be both MP-authored and a
/// reply to another MP; it then appears in both collections.
pub fn link_replies(tweets: Vec<Tweet>, registry: &BTreeMap<String, MPRecord>) -> LinkedCorpus {
    let mut corpus = LinkedCorpus::default();
    for handle in registry.keys() {
        corpus.replies_by_mp.insert(handle.clone(), Vec::new());
    }
    for tweet in tweets {
        let mut used = false;
        if registry.contains_key(&tweet.author_handle) {
            corpus.mp_authored.push(tweet.clone());
            used = true;
        }
        if let Some(mp) = reply_recipient(&tweet, registry) {
            corpus
                .replies_by_mp
                .get_mut(mp)
                .expect("seeded with all registry handles")
                .push(tweet.clone());
            used = true;
        }
        if !used {
            corpus.discarded += 1;
        }
    }
    for replies in corpus.replies_by_mp.values_mut() {
        replies.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    }
    corpus
        .mp_authored
        .sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    corpus
}

/// Bucket linked replies into per-MP daily series over `[start, end]`.
///
/// Days are UTC calendar days of `created_at`. Replies outside the window
/// are counted in the returned drop counter, not an error. The abuse
/// channel counts replies classified as abusive at the recipient
/// (recipient-targeted or counted-untargeted); abuse about third parties
/// appears in reply counts but not abuse counts.
pub fn build_daily_series(
    corpus: &LinkedCorpus,
    classifications: &HashMap<String, Classification>,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<(BTreeMap<String, DailySeries>, u64), IngestError> {
    if start > end {
        return Err(IngestError::InvalidWindow { start, end });
    }
    let days = (end - start).num_days() as usize + 1;
    let mut out: BTreeMap<String, DailySeries> = BTreeMap::new();
    let mut dropped = 0u64;
    for (handle, replies) in &corpus.replies_by_mp {
        let mut series = DailySeries {
            handle: handle.clone(),
            start_date: start,
            abuse_counts: vec![0; days],
            reply_counts: vec![0; days],
        };
        for reply in replies {
            let day = reply.created_at.date_naive();
            if day < start || day > end {
                dropped += 1;
                continue;
            }
            let idx = (day - start).num_days() as usize;
            series.reply_counts[idx] += 1;
            let classification =
                classifications
                    .get(&reply.id)
                    .ok_or_else(|| IngestError::MissingClassification {
                        id: reply.id.clone(),
                    })?;
            if classification.counts_toward_recipient() {
                series.abuse_counts[idx] += 1;
            }
        }
        out.insert(handle.clone(), series);
    }
    Ok((out, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abuse_engine::Target;
    use std::io::Write;

    fn tweet_json(id: &str, created: &str, reply_to: Option<&str>, retweet: bool) -> String {
        let reply = match reply_to {
            Some(h) => format!("\"{h}\""),
            None => "null".to_string(),
        };
        format!(
            "{{\"id\":\"{id}\",\"author_handle\":\"User{id}\",\"created_at\":\"{created}\",\
             \"text\":\"hello\",\"in_reply_to_handle\":{reply},\"in_reply_to_id\":null,\
             \"is_retweet\":{retweet}}}"
        )
    }

    #[test]
    fn parse_extracts_fields_and_lowercases_handles() {
        let line = tweet_json("42", "2019-01-15T10:30:00Z", Some("MP_One"), false);
        let t = parse_tweet_line(&line, 1).unwrap();
        assert_eq!(t.id, "42");
        assert_eq!(t.author_handle, "user42");
        assert_eq!(t.in_reply_to_handle.as_deref(), Some("mp_one"));
        assert_eq!(t.in_reply_to_id, None);
        assert!(!t.is_retweet);
        assert_eq!(t.created_at.to_rfc3339(), "2019-01-15T10:30:00+00:00");
    }

    #[test]
    fn parse_converts_offset_timestamps_to_utc() {
        let line = tweet_json("1", "2019-01-15T22:00:00-05:00", None, false);
        let t = parse_tweet_line(&line, 1).unwrap();
        assert_eq!(
            t.created_at.date_naive(),
            NaiveDate::from_ymd_opt(2019, 1, 16).unwrap()
        );
    }

    #[test]
    fn parse_reports_malformed_json_with_offset() {
        let err = parse_tweet_line("{\"id\": \"1\",", 7).unwrap_err();
        match err {
            IngestError::MalformedJson { line, .. } => assert_eq!(line, 7),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn parse_names_the_missing_field() {
        let line = "{\"id\":\"1\",\"author_handle\":\"a\",\"created_at\":\"2019-01-01T00:00:00Z\",\"is_retweet\":false}";
        match parse_tweet_line(line, 3).unwrap_err() {
            IngestError::MissingField { field, line } => {
                assert_eq!(field, "text");
                assert_eq!(line, 3);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn parse_rejects_bad_timestamps_and_mistyped_fields() {
        let bad_time = tweet_json("1", "20190115", None, false);
        assert!(matches!(
            parse_tweet_line(&bad_time, 1).unwrap_err(),
            IngestError::BadTimestamp { .. }
        ));
        let bad_id = "{\"id\":5,\"author_handle\":\"a\",\"created_at\":\"2019-01-01T00:00:00Z\",\"text\":\"x\",\"is_retweet\":false}";
        assert!(matches!(
            parse_tweet_line(bad_id, 1).unwrap_err(),
            IngestError::BadField { field: "id", .. }
        ));
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const REGISTRY: &str = "handle,display_name,party,gender,ethnicity_group\n\
        mp_one,First MP,alpha,female,white\n\
        mp_two,Second MP,beta,male,minority\n";

    #[test]
    fn registry_loads_and_lowercases() {
        let f = write_temp(
            "handle,display_name,party,gender,ethnicity_group\nMP_One,First,alpha,female,white\n",
        );
        let reg = load_registry(f.path()).unwrap();
        assert_eq!(reg.len(), 1);
        let mp = &reg["mp_one"];
        assert_eq!(mp.gender, Gender::Female);
        assert_eq!(mp.ethnicity_group, EthnicityGroup::White);
    }

    #[test]
    fn registry_rejects_duplicates_unknown_enums_and_missing_columns() {
        let dup = write_temp(
            "handle,display_name,party,gender,ethnicity_group\nmp,A,p,female,white\nMP,B,p,male,white\n",
        );
        assert!(matches!(
            load_registry(dup.path()).unwrap_err(),
            IngestError::DuplicateHandle { .. }
        ));
        let unknown = write_temp(
            "handle,display_name,party,gender,ethnicity_group\nmp,A,p,unknown,white\n",
        );
        assert!(matches!(
            load_registry(unknown.path()).unwrap_err(),
            IngestError::BadRegistryRow { .. }
        ));
        let missing = write_temp("handle,display_name,party,gender\nmp,A,p,female\n");
        assert!(matches!(
            load_registry(missing.path()).unwrap_err(),
            IngestError::MissingColumn { column: "ethnicity_group", .. }
        ));
    }

    fn mk_tweet(id: &str, author: &str, reply_to: Option<&str>, retweet: bool) -> Tweet {
        Tweet {
            id: id.to_string(),
            author_handle: author.to_string(),
            created_at: DateTime::parse_from_rfc3339("2019-01-15T12:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            text: "hello".to_string(),
            in_reply_to_handle: reply_to.map(str::to_string),
            in_reply_to_id: None,
            is_retweet: retweet,
        }
    }

    #[test]
    fn linking_assigns_replies_tags_mp_tweets_and_discards_the_rest() {
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let tweets = vec![
            mk_tweet("1", "fan", Some("mp_one"), false),
            mk_tweet("2", "mp_one", None, false),
            mk_tweet("3", "fan", Some("nobody"), false),
            mk_tweet("4", "fan", Some("mp_one"), true), // retweet, never a reply
            mk_tweet("5", "fan", None, false),
        ];
        let corpus = link_replies(tweets, &registry);
        assert_eq!(corpus.replies_by_mp["mp_one"].len(), 1);
        assert_eq!(corpus.replies_by_mp["mp_two"].len(), 0);
        assert_eq!(corpus.mp_authored.len(), 1);
        assert_eq!(corpus.discarded, 3);
    }

    #[test]
    fn mp_replying_to_an_mp_lands_in_both_roles() {
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let corpus = link_replies(vec![mk_tweet("1", "mp_two", Some("mp_one"), false)], &registry);
        assert_eq!(corpus.replies_by_mp["mp_one"].len(), 1);
        assert_eq!(corpus.mp_authored.len(), 1);
        assert_eq!(corpus.discarded, 0);
    }

    #[test]
    fn linking_is_independent_of_input_order() {
        use rand::prelude::*;
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let tweets: Vec<Tweet> = (0..50)
            .map(|i| {
                let reply = match i % 3 {
                    0 => Some("mp_one"),
                    1 => Some("mp_two"),
                    _ => None,
                };
                mk_tweet(&format!("{i}"), "fan", reply, false)
            })
            .collect();
        let baseline = link_replies(tweets.clone(), &registry);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut shuffled = tweets.clone();
            shuffled.shuffle(&mut rng);
            let got = link_replies(shuffled, &registry);
            assert_eq!(got.replies_by_mp, baseline.replies_by_mp);
            assert_eq!(got.mp_authored, baseline.mp_authored);
            assert_eq!(got.discarded, baseline.discarded);
        }
    }

    fn classification(target: Target, abusive: bool) -> Classification {
        Classification {
            abusive,
            matches: Vec::new(),
            target,
            max_components: 0,
        }
    }

    #[test]
    fn daily_series_buckets_by_utc_day_and_counts_recipient_abuse() {
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let mut t1 = mk_tweet("1", "fan", Some("mp_one"), false);
        t1.created_at = DateTime::parse_from_rfc3339("2019-01-15T23:30:00Z")
            .unwrap()
            .with_timezone(&Utc);
        let mut t2 = mk_tweet("2", "fan", Some("mp_one"), false);
        t2.created_at = DateTime::parse_from_rfc3339("2019-01-15T22:00:00-05:00") // Jan 16 UTC
            .unwrap()
            .with_timezone(&Utc);
        let mut t3 = mk_tweet("3", "fan", Some("mp_one"), false);
        t3.created_at = DateTime::parse_from_rfc3339("2019-01-16T08:00:00Z")
            .unwrap()
            .with_timezone(&Utc);
        let corpus = link_replies(vec![t1, t2, t3], &registry);
        let mut classifications = HashMap::new();
        classifications.insert("1".to_string(), classification(Target::Recipient, true));
        classifications.insert("2".to_string(), classification(Target::ThirdParty, true));
        classifications.insert(
            "3".to_string(),
            classification(Target::UntargetedCounted, true),
        );
        let start = NaiveDate::from_ymd_opt(2019, 1, 15).unwrap();
        let end = NaiveDate::from_ymd_opt(2019, 1, 17).unwrap();
        let (series, dropped) =
            build_daily_series(&corpus, &classifications, start, end).unwrap();
        assert_eq!(dropped, 0);
        let s = &series["mp_one"];
        assert_eq!(s.reply_counts, vec![1, 2, 0]);
        // Third-party abuse is in the reply counts but not the abuse channel.
        assert_eq!(s.abuse_counts, vec![1, 1, 0]);
        // MPs with no replies still get a zeroed series.
        assert_eq!(series["mp_two"].reply_counts, vec![0, 0, 0]);
    }

    #[test]
    fn out_of_window_replies_are_dropped_and_counted() {
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let corpus = link_replies(vec![mk_tweet("1", "fan", Some("mp_one"), false)], &registry);
        let mut classifications = HashMap::new();
        classifications.insert("1".to_string(), classification(Target::NotCounted, false));
        let start = NaiveDate::from_ymd_opt(2019, 2, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2019, 2, 10).unwrap();
        let (series, dropped) =
            build_daily_series(&corpus, &classifications, start, end).unwrap();
        assert_eq!(dropped, 1);
        assert!(series["mp_one"].reply_counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn missing_classification_and_inverted_window_are_errors() {
        let reg_file = write_temp(REGISTRY);
        let registry = load_registry(reg_file.path()).unwrap();
        let corpus = link_replies(vec![mk_tweet("1", "fan", Some("mp_one"), false)], &registry);
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2019, 1, 31).unwrap();
        assert!(matches!(
            build_daily_series(&corpus, &HashMap::new(), start, end).unwrap_err(),
            IngestError::MissingClassification { .. }
        ));
        assert!(matches!(
            build_daily_series(&corpus, &HashMap::new(), end, start).unwrap_err(),
            IngestError::InvalidWindow { .. }
        ));
    }

    #[test]
    fn series_constructor_enforces_shape_and_bounds() {
        let date = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        assert!(DailySeries::new("mp".into(), date, vec![1, 0], vec![2, 1]).is_ok());
        assert!(DailySeries::new("mp".into(), date, vec![], vec![]).is_err());
        assert!(DailySeries::new("mp".into(), date, vec![1], vec![1, 2]).is_err());
        assert!(DailySeries::new("mp".into(), date, vec![3], vec![2]).is_err());
    }
}
