//! Command-line interface: subcommands orchestrating ingestion,
//! classification, statistics, temporal analysis, and evaluation.
//!
//! Every report is written atomically (temp file, then rename) with stable
//! row ordering and fixed 6-decimal float formatting, so identical inputs
//! and configuration produce byte-identical files regardless of worker
//! count. Progress and stage timings go to stderr; stdout stays quiet.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use crate::abuse_engine::{classify, AbuseMatch, AbuseType, Classification, Target};
use crate::corpus_ingest::{
    build_daily_series, load_registry, parse_tweet_line, reply_recipient, EthnicityGroup, Gender,
    IngestError, LinkedCorpus, MPRecord, Tweet,
};
use crate::eval_harness::{evaluate, EvalFormat, EvalReport};
use crate::lexicon::{load_abuse_terms, load_topic_terms, CompiledLexicon};
use crate::pipeline;
use crate::stats::{
    aggregate_series, compare_groups, month_key, monthly_trend, topic_heatmap, GroupComparison,
    Heatmap, MPSummary, MonthRow, StatsError, SummaryAccumulator,
};
use crate::temporal::{
    burstiness_report, churn_series, focus, gini_points, BoxplotRow, Channel, ChurnPoint,
    GiniPoint, SliceMode, TemporalError,
};
use crate::topic_engine::{detect_topics, topic_set, OTHER_TOPIC};

/// Errors split by exit code: bad input or usage exits 1, everything that
/// went wrong on our side (unwritable output, broken invariants) exits 2.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "abuse-analytics",
    version,
    about = "Detect, type, and target abusive replies to politicians, and measure how bursty the abuse is"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify every tweet in a JSONL file; one JSON verdict per input line.
    Classify(CommonArgs),
    /// Per-MP summaries, topic heatmap, monthly trend, and group comparisons.
    Stats(CommonArgs),
    /// Focus windows, churn, Gini, and burstiness box plots.
    Temporal(TemporalArgs),
    /// Score the classifier against a labeled CSV.
    Eval(EvalArgs),
    /// Topic-term matches per tweet.
    Topics(CommonArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Plain-text key=value defaults; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tweet corpus, JSON lines.
    #[arg(long)]
    tweets: Option<PathBuf>,
    /// Politician registry CSV.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Abuse term lexicon CSV.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Topic term lexicon CSV.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel classification workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Analysis window start (YYYY-MM-DD); derived from the data if omitted.
    #[arg(long)]
    window_start: Option<String>,
    /// Analysis window end (YYYY-MM-DD); derived from the data if omitted.
    #[arg(long)]
    window_end: Option<String>,
}

#[derive(Args, Debug)]
struct TemporalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Slice sizes in days, e.g. 1..10 or a single number.
    #[arg(long)]
    slices: Option<String>,
    /// How slices cover the window: tiled or sliding.
    #[arg(long)]
    slice_mode: Option<String>,
    /// Comma-separated channels: abuse, all_replies, corrected_replies.
    #[arg(long)]
    channels: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labeled CSV of text and binary labels.
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Labeled CSV layout: plain (label,text) or kaggle (Insult,Date,Comment).
    #[arg(long)]
    format: Option<String>,
}

/// Everything a run needs, after merging flags with the optional config
/// file. Fields a given subcommand does not use stay None.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tweets: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub labeled: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
    pub slices: RangeInclusive<usize>,
    pub slice_mode: SliceMode,
    pub channels: Vec<Channel>,
    pub format: EvalFormat,
}

#[derive(Debug, Default)]
struct ExtraArgs {
    slices: Option<String>,
    slice_mode: Option<String>,
    channels: Option<String>,
    labeled: Option<PathBuf>,
    format: Option<String>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Inclusive day-count range, written `A..B` (both ends kept) or `N`.
fn parse_slices(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").unwrap_or((s, s));
    let lo: usize = a
        .trim()
        .parse()
        .map_err(|_| format!("bad slice range {s:?}: expected N or A..B"))?;
    let hi: usize = b
        .trim()
        .parse()
        .map_err(|_| format!("bad slice range {s:?}: expected N or A..B"))?;
    if lo == 0 || hi < lo {
        return Err(format!("slice range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(lo..=hi)
}

fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("reading config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Input(format!(
                "config {} line {}: expected key=value",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn resolve_config(common: CommonArgs, extra: ExtraArgs) -> Result<RunConfig, CliError> {
    let file = match &common.config {
        Some(path) => load_config_file(path)?,
        None => BTreeMap::new(),
    };
    let path_of = |flag: Option<PathBuf>, key: &str| -> Option<PathBuf> {
        flag.or_else(|| file.get(key).map(PathBuf::from))
    };
    let string_of = |flag: Option<String>, key: &str| -> Option<String> {
        flag.or_else(|| file.get(key).cloned())
    };

    let workers = match (common.workers, file.get("workers")) {
        (Some(w), _) => w,
        (None, Some(raw)) => raw
            .parse()
            .map_err(|_| CliError::Input(format!("config workers={raw}: not a number")))?,
        (None, None) => default_workers(),
    };
    if workers == 0 {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }

    let date_of = |flag: Option<String>, key: &str| -> Result<Option<NaiveDate>, CliError> {
        match string_of(flag, key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<NaiveDate>()
                .map(Some)
                .map_err(|e| CliError::Input(format!("{key} {raw:?}: {e}"))),
        }
    };
    let window_start = date_of(common.window_start, "window-start")?;
    let window_end = date_of(common.window_end, "window-end")?;
    if let (Some(s), Some(e)) = (window_start, window_end) {
        if s > e {
            return Err(CliError::Input(format!(
                "window start {s} is after window end {e}"
            )));
        }
    }

    let slices = match string_of(extra.slices, "slices") {
        Some(raw) => parse_slices(&raw).map_err(CliError::Input)?,
        None => 1..=10,
    };
    let slice_mode = match string_of(extra.slice_mode, "slice-mode").as_deref() {
        None | Some("tiled") => SliceMode::Tiled,
        Some("sliding") => SliceMode::Sliding,
        Some(other) => {
            return Err(CliError::Input(format!(
                "unknown slice mode {other:?}: expected tiled or sliding"
            )))
        }
    };
    let channels = match string_of(extra.channels, "channels") {
        None => vec![
            Channel::Abuse,
            Channel::AllReplies,
            Channel::CorrectedReplies,
        ],
        Some(raw) => {
            let mut out: Vec<Channel> = Vec::new();
            for part in raw.split(',') {
                let channel = part.trim().parse().map_err(CliError::Input)?;
                if !out.contains(&channel) {
                    out.push(channel);
                }
            }
            if out.is_empty() {
                return Err(CliError::Input("--channels must name a channel".into()));
            }
            out
        }
    };
    let format = match string_of(extra.format, "format").as_deref() {
        None | Some("plain") => EvalFormat::Plain,
        Some("kaggle") => EvalFormat::Kaggle,
        Some(other) => {
            return Err(CliError::Input(format!(
                "unknown eval format {other:?}: expected plain or kaggle"
            )))
        }
    };

    Ok(RunConfig {
        tweets: path_of(common.tweets, "tweets"),
        registry: path_of(common.registry, "registry"),
        lexicon: path_of(common.lexicon, "lexicon"),
        topics: path_of(common.topics, "topics"),
        labeled: path_of(extra.labeled, "labeled"),
        out_dir: path_of(common.out, "out"),
        workers,
        window_start,
        window_end,
        slices,
        slice_mode,
        channels,
        format,
    })
}

/// Parse argv, run the selected pipeline, map the outcome to an exit code:
/// 0 success, 1 input or usage error, 2 internal error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Classify(c) => {
            resolve_config(c, ExtraArgs::default()).and_then(run_classify)
        }
        Command::Stats(c) => resolve_config(c, ExtraArgs::default()).and_then(run_stats),
        Command::Temporal(t) => resolve_config(
            t.common,
            ExtraArgs {
                slices: t.slices,
                slice_mode: t.slice_mode,
                channels: t.channels,
                ..ExtraArgs::default()
            },
        )
        .and_then(run_temporal),
        Command::Eval(e) => resolve_config(
            e.common,
            ExtraArgs {
                labeled: e.labeled,
                format: e.format,
                ..ExtraArgs::default()
            },
        )
        .and_then(run_eval),
        Command::Topics(c) => resolve_config(c, ExtraArgs::default()).and_then(run_topics),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn subcommand_usage(sub: &str) -> String {
    let mut cmd = Cli::command();
    match cmd.find_subcommand_mut(sub) {
        Some(c) => c.render_usage().to_string(),
        None => String::new(),
    }
}

fn require_path<'a>(
    value: &'a Option<PathBuf>,
    flag: &str,
    sub: &'static str,
) -> Result<&'a Path, CliError> {
    value.as_deref().ok_or_else(|| {
        CliError::Input(format!(
            "missing required --{flag}\n{}",
            subcommand_usage(sub)
        ))
    })
}

fn prepare_out(cfg: &RunConfig, sub: &'static str) -> Result<PathBuf, CliError> {
    let dir = require_path(&cfg.out_dir, "out", sub)?;
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Internal(format!("creating output directory {}: {e}", dir.display()))
    })?;
    Ok(dir.to_path_buf())
}

fn load_compiled(cfg: &RunConfig, sub: &'static str) -> Result<CompiledLexicon, CliError> {
    let lexicon_path = require_path(&cfg.lexicon, "lexicon", sub)?;
    let entries = load_abuse_terms(lexicon_path).map_err(input_err)?;
    let topic_terms = match &cfg.topics {
        Some(path) => load_topic_terms(path).map_err(input_err)?,
        None => BTreeMap::new(),
    };
    Ok(CompiledLexicon::compile(entries, topic_terms))
}

struct Stage {
    name: &'static str,
    started: Instant,
}

impl Stage {
    fn new(name: &'static str) -> Stage {
        Stage {
            name,
            started: Instant::now(),
        }
    }
    fn done(self) {
        eprintln!(
            "[stage] {}: {:.2}s",
            self.name,
            self.started.elapsed().as_secs_f64()
        );
    }
}

fn report_throughput(name: &str, stats: &pipeline::PipelineStats) {
    eprintln!(
        "[stage] {name}: {} lines in {:.2}s ({:.0} lines/s)",
        stats.lines,
        stats.elapsed.as_secs_f64(),
        stats.lines_per_second()
    );
}

/// Write a report file atomically: the closure fills a temp file in the
/// same directory, which is renamed over the final name only on success.
fn write_atomic<F>(dir: &Path, name: &str, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    let tmp = dir.join(format!(".{name}.tmp"));
    let file = File::create(&tmp)
        .map_err(|e| CliError::Internal(format!("creating {}: {e}", tmp.display())))?;
    let mut writer = BufWriter::new(file);
    let result = fill(&mut writer).and_then(|()| {
        writer
            .flush()
            .map_err(|e| CliError::Internal(format!("writing {name}: {e}")))
    });
    match result {
        Ok(()) => std::fs::rename(&tmp, dir.join(name))
            .map_err(|e| CliError::Internal(format!("renaming {name}: {e}"))),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn csv_file<F>(dir: &Path, name: &'static str, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut csv::Writer<&mut BufWriter<File>>) -> csv::Result<()>,
{
    write_atomic(dir, name, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        fill(&mut wtr).map_err(|e| CliError::Internal(format!("writing {name}: {e}")))?;
        wtr.flush()
            .map_err(|e| CliError::Internal(format!("writing {name}: {e}")))
    })
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------------------
// Shared corpus scan

/// Everything one streaming pass over the tweet file produces: skeleton
/// replies grouped by recipient (texts dropped once classified, so memory
/// stays proportional to reply count, not text volume), classifications by
/// tweet id, and topic sets of MP-authored tweets.
struct ScanResult {
    replies_by_mp: BTreeMap<String, Vec<Tweet>>,
    classifications: HashMap<String, Classification>,
    topics_by_tweet: HashMap<String, BTreeSet<String>>,
    discarded: u64,
    reply_dates: Option<(NaiveDate, NaiveDate)>,
}

struct LineOut {
    is_mp: bool,
    mp_topics: Option<(String, BTreeSet<String>)>,
    reply: Option<(String, Tweet, Classification)>,
}

enum LineScan {
    Ok(LineOut),
    Failed(IngestError),
}

fn scan_corpus(
    path: &Path,
    registry: &BTreeMap<String, MPRecord>,
    lex: &CompiledLexicon,
    workers: usize,
    want_topics: bool,
) -> Result<ScanResult, CliError> {
    let mut result = ScanResult {
        replies_by_mp: registry
            .keys()
            .map(|h| (h.clone(), Vec::new()))
            .collect(),
        classifications: HashMap::new(),
        topics_by_tweet: HashMap::new(),
        discarded: 0,
        reply_dates: None,
    };
    let mut first_err: Option<IngestError> = None;

    let stats = pipeline::map_lines_ordered(
        path,
        workers,
        |idx, line| {
            let tweet = match parse_tweet_line(line, idx + 1) {
                Ok(t) => t,
                Err(e) => return LineScan::Failed(e),
            };
            let is_mp = registry.contains_key(&tweet.author_handle);
            let mp_topics = if is_mp && want_topics {
                Some((tweet.id.clone(), topic_set(&tweet.text, lex)))
            } else {
                None
            };
            let recipient = reply_recipient(&tweet, registry).map(str::to_string);
            let reply = recipient.map(|mp| {
                let classification = classify(&tweet.text, lex);
                let skeleton = Tweet {
                    id: tweet.id.clone(),
                    author_handle: String::new(),
                    created_at: tweet.created_at,
                    text: String::new(),
                    in_reply_to_handle: None,
                    in_reply_to_id: tweet.in_reply_to_id.clone(),
                    is_retweet: false,
                };
                (mp, skeleton, classification)
            });
            LineScan::Ok(LineOut {
                is_mp,
                mp_topics,
                reply,
            })
        },
        |_, out| match out {
            LineScan::Failed(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
            LineScan::Ok(line) => {
                if !line.is_mp && line.reply.is_none() {
                    result.discarded += 1;
                }
                if let Some((id, topics)) = line.mp_topics {
                    result.topics_by_tweet.insert(id, topics);
                }
                if let Some((mp, skeleton, classification)) = line.reply {
                    let day = skeleton.created_at.date_naive();
                    result.reply_dates = Some(match result.reply_dates {
                        None => (day, day),
                        Some((lo, hi)) => (lo.min(day), hi.max(day)),
                    });
                    result
                        .classifications
                        .insert(skeleton.id.clone(), classification);
                    result
                        .replies_by_mp
                        .get_mut(&mp)
                        .expect("seeded with every registry handle")
                        .push(skeleton);
                }
            }
        },
    )
    .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;

    if let Some(e) = first_err {
        return Err(CliError::Input(e.to_string()));
    }
    for replies in result.replies_by_mp.values_mut() {
        replies.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    }
    report_throughput("parse+classify", &stats);
    Ok(result)
}

fn resolve_window(
    cfg: &RunConfig,
    derived: (NaiveDate, NaiveDate),
) -> Result<(NaiveDate, NaiveDate), CliError> {
    let start = cfg.window_start.unwrap_or(derived.0);
    let end = cfg.window_end.unwrap_or(derived.1);
    if start > end {
        return Err(CliError::Input(format!(
            "window start {start} is after window end {end}"
        )));
    }
    Ok((start, end))
}

fn total_replies(scan: &ScanResult) -> u64 {
    scan.replies_by_mp.values().map(|v| v.len() as u64).sum()
}

// ---------------------------------------------------------------------------
// classify

#[derive(Serialize)]
struct ClassificationRecord<'a> {
    id: &'a str,
    abusive: bool,
    target: Target,
    types: BTreeSet<AbuseType>,
    max_components: usize,
    spans: &'a [AbuseMatch],
}

fn run_classify(cfg: RunConfig) -> Result<(), CliError> {
    let tweets = require_path(&cfg.tweets, "tweets", "classify")?.to_path_buf();
    let lex = load_compiled(&cfg, "classify")?;
    let out_dir = prepare_out(&cfg, "classify")?;
    let workers = cfg.workers;

    write_atomic(&out_dir, "classifications.jsonl", |w| {
        let mut parse_err: Option<IngestError> = None;
        let mut io_err: Option<io::Error> = None;
        let stats = pipeline::map_lines_ordered(
            &tweets,
            workers,
            |idx, line| -> Result<String, IngestError> {
                let tweet = parse_tweet_line(line, idx + 1)?;
                let c = classify(&tweet.text, &lex);
                let record = ClassificationRecord {
                    id: &tweet.id,
                    abusive: c.abusive,
                    target: c.target,
                    types: c.types(),
                    max_components: c.max_components,
                    spans: &c.matches,
                };
                Ok(serde_json::to_string(&record).expect("record serializes"))
            },
            |_, result| match result {
                Ok(json) => {
                    if parse_err.is_none() && io_err.is_none() {
                        if let Err(e) = writeln!(w, "{json}") {
                            io_err = Some(e);
                        }
                    }
                }
                Err(e) => {
                    if parse_err.is_none() {
                        parse_err = Some(e);
                    }
                }
            },
        )
        .map_err(|e| CliError::Input(format!("reading {}: {e}", tweets.display())))?;
        if let Some(e) = parse_err {
            return Err(CliError::Input(e.to_string()));
        }
        if let Some(e) = io_err {
            return Err(CliError::Internal(format!("writing classifications: {e}")));
        }
        report_throughput("classify", &stats);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// stats

fn run_stats(cfg: RunConfig) -> Result<(), CliError> {
    let tweets = require_path(&cfg.tweets, "tweets", "stats")?.to_path_buf();
    let registry_path = require_path(&cfg.registry, "registry", "stats")?.to_path_buf();
    let lex = load_compiled(&cfg, "stats")?;
    let registry = load_registry(&registry_path).map_err(input_err)?;
    let out_dir = prepare_out(&cfg, "stats")?;

    let scan = scan_corpus(&tweets, &registry, &lex, cfg.workers, true)?;
    if total_replies(&scan) == 0 {
        eprintln!("no replies to registry accounts; writing empty reports");
        write_mp_summary(&out_dir, &[])?;
        write_heatmap(
            &out_dir,
            &Heatmap {
                months: Vec::new(),
                rows: Vec::new(),
            },
        )?;
        write_trends(&out_dir, &[])?;
        return write_comparisons(&out_dir, &[]);
    }
    let (start, end) = resolve_window(&cfg, scan.reply_dates.expect("replies exist"))?;

    let stage = Stage::new("aggregate");
    let ScanResult {
        replies_by_mp,
        classifications,
        topics_by_tweet,
        discarded,
        ..
    } = scan;
    let corpus = LinkedCorpus {
        replies_by_mp,
        mp_authored: Vec::new(),
        discarded,
    };
    let (series, dropped) =
        build_daily_series(&corpus, &classifications, start, end).map_err(|e| match e {
            IngestError::InvalidWindow { .. } => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        })?;

    let mut acc = SummaryAccumulator::new(registry.keys().map(String::as_str));
    let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (mp, replies) in &corpus.replies_by_mp {
        for reply in replies {
            let day = reply.created_at.date_naive();
            if day < start || day > end {
                continue;
            }
            let c = classifications.get(&reply.id).ok_or_else(|| {
                CliError::Internal(format!("missing classification for tweet {}", reply.id))
            })?;
            acc.observe(mp, c);
            if c.abusive {
                let month = month_key(day);
                let inherited = reply
                    .in_reply_to_id
                    .as_deref()
                    .and_then(|pid| topics_by_tweet.get(pid))
                    .filter(|set| !set.is_empty());
                match inherited {
                    Some(set) => {
                        for topic in set {
                            *cells.entry((topic.clone(), month.clone())).or_insert(0) += 1;
                        }
                    }
                    None => *cells.entry((OTHER_TOPIC.to_string(), month)).or_insert(0) += 1,
                }
            }
        }
    }
    let summaries = acc.finish();
    let heatmap = topic_heatmap(&cells);
    let trend = match aggregate_series(&series).and_then(|agg| monthly_trend(&agg)) {
        Ok(rows) => rows,
        Err(StatsError::InsufficientMonths(_)) => Vec::new(),
        Err(e) => return Err(CliError::Internal(e.to_string())),
    };
    let comparisons = build_comparisons(&summaries, &registry)?;
    stage.done();
    if dropped > 0 {
        eprintln!("{dropped} replies fell outside {start}..{end} and were ignored");
    }

    let stage = Stage::new("write reports");
    write_mp_summary(&out_dir, &summaries)?;
    write_heatmap(&out_dir, &heatmap)?;
    write_trends(&out_dir, &trend)?;
    write_comparisons(&out_dir, &comparisons)?;
    stage.done();
    Ok(())
}

fn build_comparisons(
    summaries: &[MPSummary],
    registry: &BTreeMap<String, MPRecord>,
) -> Result<Vec<(&'static str, GroupComparison)>, CliError> {
    let active: Vec<(&MPSummary, &MPRecord)> = summaries
        .iter()
        .filter(|s| s.replies_total > 0)
        .map(|s| {
            (
                s,
                registry
                    .get(&s.handle)
                    .expect("summary handles come from the registry"),
            )
        })
        .collect();
    let sample = |keep: &dyn Fn(&MPRecord) -> bool| -> Vec<f64> {
        active
            .iter()
            .filter(|(_, r)| keep(r))
            .map(|(s, _)| s.abuse_pct)
            .collect()
    };
    let mut rows = Vec::new();

    let female = sample(&|r| r.gender == Gender::Female);
    let male = sample(&|r| r.gender == Gender::Male);
    if female.is_empty() || male.is_empty() {
        eprintln!("skipping gender comparison: a group has no MPs with replies");
    } else {
        let cmp = compare_groups("female", &female, "male", &male)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        rows.push(("gender", cmp));
    }

    let minority = sample(&|r| r.ethnicity_group == EthnicityGroup::Minority);
    let white = sample(&|r| r.ethnicity_group == EthnicityGroup::White);
    if minority.is_empty() || white.is_empty() {
        eprintln!("skipping ethnicity comparison: a group has no MPs with replies");
    } else {
        let cmp = compare_groups("minority", &minority, "white", &white)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        rows.push(("ethnicity", cmp));
    }

    // Parties are free-form registry strings; compare the two with the most
    // active MPs so small corpora still get a meaningful pair.
    let mut party_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, r) in &active {
        *party_counts.entry(r.party.as_str()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, usize)> = party_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if ranked.len() < 2 {
        eprintln!("skipping party comparison: fewer than two parties have MPs with replies");
    } else {
        let (pa, pb) = (ranked[0].0, ranked[1].0);
        let sa = sample(&|r| r.party == pa);
        let sb = sample(&|r| r.party == pb);
        let cmp =
            compare_groups(pa, &sa, pb, &sb).map_err(|e| CliError::Internal(e.to_string()))?;
        rows.push(("party", cmp));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// temporal

struct FocusRow {
    handle: String,
    channel: Channel,
    start: NaiveDate,
    end: NaiveDate,
    focus: f64,
    normalized: f64,
    threshold: f64,
}

fn date_at(start: NaiveDate, index: usize) -> NaiveDate {
    start
        .checked_add_days(chrono::Days::new(index as u64))
        .expect("window fits the calendar")
}

fn run_temporal(cfg: RunConfig) -> Result<(), CliError> {
    let tweets = require_path(&cfg.tweets, "tweets", "temporal")?.to_path_buf();
    let registry_path = require_path(&cfg.registry, "registry", "temporal")?.to_path_buf();
    let lex = load_compiled(&cfg, "temporal")?;
    let registry = load_registry(&registry_path).map_err(input_err)?;
    let out_dir = prepare_out(&cfg, "temporal")?;

    let scan = scan_corpus(&tweets, &registry, &lex, cfg.workers, false)?;
    let empty_reports = |note: &str| -> Result<(), CliError> {
        eprintln!("{note}; writing empty reports");
        write_focus(&out_dir, &[])?;
        write_churn(&out_dir, &[])?;
        write_gini(&out_dir, &[])?;
        write_boxplot(&out_dir, &[])
    };
    if total_replies(&scan) == 0 {
        return empty_reports("no replies to registry accounts");
    }
    let (start, end) = resolve_window(&cfg, scan.reply_dates.expect("replies exist"))?;

    let stage = Stage::new("temporal metrics");
    let ScanResult {
        replies_by_mp,
        classifications,
        discarded,
        ..
    } = scan;
    let corpus = LinkedCorpus {
        replies_by_mp,
        mp_authored: Vec::new(),
        discarded,
    };
    let (series, dropped) =
        build_daily_series(&corpus, &classifications, start, end).map_err(|e| match e {
            IngestError::InvalidWindow { .. } => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        })?;
    drop(corpus);
    drop(classifications);
    if dropped > 0 {
        eprintln!("{dropped} replies fell outside {start}..{end} and were ignored");
    }

    let agg = aggregate_series(&series).map_err(|e| CliError::Internal(e.to_string()))?;
    let reply_sum: u64 = agg.reply_counts.iter().map(|&c| c as u64).sum();
    let abuse_sum: u64 = agg.abuse_counts.iter().map(|&c| c as u64).sum();
    if reply_sum == 0 {
        stage.done();
        return empty_reports("no replies inside the analysis window");
    }
    let proportion = abuse_sum as f64 / reply_sum as f64;
    let days = agg.days();

    let mut focus_rows = Vec::new();
    for (handle, s) in &series {
        for &channel in &cfg.channels {
            match focus(s, channel, proportion) {
                Ok(r) => focus_rows.push(FocusRow {
                    handle: handle.clone(),
                    channel,
                    start: date_at(s.start_date, r.window.0),
                    end: date_at(s.start_date, r.window.1),
                    focus: r.focus,
                    normalized: r.normalized_focus,
                    threshold: r.threshold,
                }),
                Err(TemporalError::AllZero { .. }) => {}
                Err(e) => return Err(CliError::Internal(e.to_string())),
            }
        }
    }

    let mut churn_rows: Vec<(Channel, usize, ChurnPoint)> = Vec::new();
    let mut gini_rows: Vec<(Channel, usize, GiniPoint)> = Vec::new();
    for &channel in &cfg.channels {
        for slice_days in cfg.slices.clone() {
            if slice_days > days {
                continue;
            }
            let churn = churn_series(&series, channel, slice_days, cfg.slice_mode)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            churn_rows.extend(churn.into_iter().map(|p| (channel, slice_days, p)));
            let gini = gini_points(&series, channel, slice_days, cfg.slice_mode)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            gini_rows.extend(gini.into_iter().map(|p| (channel, slice_days, p)));
        }
    }

    let nonzero = series
        .values()
        .filter(|s| s.abuse_counts.iter().any(|&c| c > 0))
        .count();
    let box_rows = if nonzero >= 2 {
        burstiness_report(&series, cfg.slices.clone(), cfg.slice_mode)
            .map_err(|e| CliError::Internal(e.to_string()))?
            .rows
    } else {
        eprintln!("skipping burstiness box plots: fewer than two MPs with abusive replies");
        Vec::new()
    };
    stage.done();

    let stage = Stage::new("write reports");
    write_focus(&out_dir, &focus_rows)?;
    write_churn(&out_dir, &churn_rows)?;
    write_gini(&out_dir, &gini_rows)?;
    write_boxplot(&out_dir, &box_rows)?;
    stage.done();
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

fn run_eval(cfg: RunConfig) -> Result<(), CliError> {
    let labeled = require_path(&cfg.labeled, "labeled", "eval")?.to_path_buf();
    let lex = load_compiled(&cfg, "eval")?;
    let out_dir = prepare_out(&cfg, "eval")?;

    let started = Instant::now();
    let report = evaluate(&labeled, &lex, cfg.format).map_err(input_err)?;
    eprintln!(
        "[stage] eval: {} rows in {:.2}s",
        report.rows(),
        started.elapsed().as_secs_f64()
    );
    eprintln!(
        "accuracy {} precision {} recall {} f1 {}",
        f6(report.accuracy),
        f6(report.precision),
        f6(report.recall),
        f6(report.f1)
    );
    write_eval(&out_dir, &report)
}

// ---------------------------------------------------------------------------
// topics

fn run_topics(cfg: RunConfig) -> Result<(), CliError> {
    let tweets = require_path(&cfg.tweets, "tweets", "topics")?.to_path_buf();
    let topics_path = require_path(&cfg.topics, "topics", "topics")?;
    let entries = match &cfg.lexicon {
        Some(path) => load_abuse_terms(path).map_err(input_err)?,
        None => Vec::new(),
    };
    let topic_terms = load_topic_terms(topics_path).map_err(input_err)?;
    let lex = CompiledLexicon::compile(entries, topic_terms);
    let registry = match &cfg.registry {
        Some(path) => Some(load_registry(path).map_err(input_err)?),
        None => None,
    };
    let out_dir = prepare_out(&cfg, "topics")?;
    let workers = cfg.workers;

    write_atomic(&out_dir, "topics.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["id", "topic", "term", "token_start", "token_end"])
            .map_err(|e| CliError::Internal(format!("writing topics.csv: {e}")))?;
        let mut parse_err: Option<IngestError> = None;
        let mut csv_err: Option<csv::Error> = None;
        let stats = pipeline::map_lines_ordered(
            &tweets,
            workers,
            |idx, line| -> Result<Vec<[String; 5]>, IngestError> {
                let tweet = parse_tweet_line(line, idx + 1)?;
                if let Some(reg) = &registry {
                    if !reg.contains_key(&tweet.author_handle) {
                        return Ok(Vec::new());
                    }
                }
                Ok(detect_topics(&tweet.text, &lex)
                    .into_iter()
                    .map(|m| {
                        [
                            tweet.id.clone(),
                            m.topic,
                            m.term,
                            m.start.to_string(),
                            m.end.to_string(),
                        ]
                    })
                    .collect())
            },
            |_, result| match result {
                Ok(rows) => {
                    if parse_err.is_none() && csv_err.is_none() {
                        for row in rows {
                            if let Err(e) = wtr.write_record(&row) {
                                csv_err = Some(e);
                                break;
                            }
                        }
                    }
                }
                Err(e) => {
                    if parse_err.is_none() {
                        parse_err = Some(e);
                    }
                }
            },
        )
        .map_err(|e| CliError::Input(format!("reading {}: {e}", tweets.display())))?;
        if let Some(e) = parse_err {
            return Err(CliError::Input(e.to_string()));
        }
        if let Some(e) = csv_err {
            return Err(CliError::Internal(format!("writing topics.csv: {e}")));
        }
        wtr.flush()
            .map_err(|e| CliError::Internal(format!("writing topics.csv: {e}")))?;
        report_throughput("topics", &stats);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// report writers

fn write_mp_summary(dir: &Path, rows: &[MPSummary]) -> Result<(), CliError> {
    csv_file(dir, "mp_summary.csv", |w| {
        w.write_record([
            "handle",
            "replies_total",
            "abusive_total",
            "abuse_pct",
            "sexist",
            "racist",
            "antisemitic",
            "islamophobic",
            "homophobic",
            "political",
            "strong_racist_count",
            "strong_any_count",
        ])?;
        for s in rows {
            w.write_record([
                s.handle.clone(),
                s.replies_total.to_string(),
                s.abusive_total.to_string(),
                f6(s.abuse_pct),
                s.sexist.to_string(),
                s.racist.to_string(),
                s.antisemitic.to_string(),
                s.islamophobic.to_string(),
                s.homophobic.to_string(),
                s.political.to_string(),
                s.strong_racist_count.to_string(),
                s.strong_any_count.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn write_heatmap(dir: &Path, heatmap: &Heatmap) -> Result<(), CliError> {
    csv_file(dir, "heatmap.csv", |w| {
        let mut header = vec!["topic".to_string(), "total".to_string()];
        header.extend(heatmap.months.iter().cloned());
        w.write_record(&header)?;
        for row in &heatmap.rows {
            let mut record = vec![row.topic.clone(), row.total.to_string()];
            record.extend(row.counts.iter().map(u64::to_string));
            w.write_record(&record)?;
        }
        Ok(())
    })
}

fn write_trends(dir: &Path, rows: &[MonthRow]) -> Result<(), CliError> {
    csv_file(dir, "trends.csv", |w| {
        w.write_record(["month", "replies", "abusive", "pct", "p_vs_prev", "rising"])?;
        for r in rows {
            w.write_record([
                r.month.clone(),
                r.replies.to_string(),
                r.abusive.to_string(),
                f6(r.pct),
                r.p_vs_prev.map(f6).unwrap_or_default(),
                r.rising.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn write_comparisons(
    dir: &Path,
    rows: &[(&'static str, GroupComparison)],
) -> Result<(), CliError> {
    csv_file(dir, "comparisons.csv", |w| {
        w.write_record([
            "comparison",
            "group_a",
            "group_b",
            "n_a",
            "n_b",
            "test",
            "statistic",
            "p_value",
        ])?;
        for (name, c) in rows {
            w.write_record([
                name.to_string(),
                c.group_a.clone(),
                c.group_b.clone(),
                c.n_a.to_string(),
                c.n_b.to_string(),
                c.test.to_string(),
                f6(c.statistic),
                f6(c.p_value),
            ])?;
        }
        Ok(())
    })
}

fn write_focus(dir: &Path, rows: &[FocusRow]) -> Result<(), CliError> {
    csv_file(dir, "focus.csv", |w| {
        w.write_record([
            "handle",
            "channel",
            "window_start",
            "window_end",
            "focus",
            "normalized_focus",
            "threshold",
        ])?;
        for r in rows {
            w.write_record([
                r.handle.clone(),
                r.channel.to_string(),
                r.start.to_string(),
                r.end.to_string(),
                f6(r.focus),
                f6(r.normalized),
                f6(r.threshold),
            ])?;
        }
        Ok(())
    })
}

fn write_churn(dir: &Path, rows: &[(Channel, usize, ChurnPoint)]) -> Result<(), CliError> {
    csv_file(dir, "churn.csv", |w| {
        w.write_record([
            "channel",
            "slice_days",
            "slice_index",
            "churn",
            "active_before",
            "active_after",
        ])?;
        for (channel, slice_days, p) in rows {
            w.write_record([
                channel.to_string(),
                slice_days.to_string(),
                p.slice_index.to_string(),
                f6(p.churn),
                p.active_before.to_string(),
                p.active_after.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn write_gini(dir: &Path, rows: &[(Channel, usize, GiniPoint)]) -> Result<(), CliError> {
    csv_file(dir, "gini.csv", |w| {
        w.write_record(["channel", "slice_days", "slice_index", "gini"])?;
        for (channel, slice_days, p) in rows {
            w.write_record([
                channel.to_string(),
                slice_days.to_string(),
                p.slice_index.to_string(),
                f6(p.gini),
            ])?;
        }
        Ok(())
    })
}

fn write_boxplot(dir: &Path, rows: &[BoxplotRow]) -> Result<(), CliError> {
    csv_file(dir, "boxplot.csv", |w| {
        w.write_record([
            "channel",
            "metric",
            "slice_days",
            "n",
            "min",
            "q1",
            "median",
            "q3",
            "max",
        ])?;
        for r in rows {
            w.write_record([
                r.channel.to_string(),
                r.metric.to_string(),
                r.slice_days.to_string(),
                r.n.to_string(),
                f6(r.min),
                f6(r.q1),
                f6(r.median),
                f6(r.q3),
                f6(r.max),
            ])?;
        }
        Ok(())
    })
}

fn write_eval(dir: &Path, report: &EvalReport) -> Result<(), CliError> {
    csv_file(dir, "eval_report.csv", |w| {
        w.write_record([
            "tp",
            "fp",
            "tn",
            "fn",
            "accuracy",
            "precision",
            "recall",
            "f1",
        ])?;
        w.write_record([
            report.tp.to_string(),
            report.fp.to_string(),
            report.tn.to_string(),
            report.fn_.to_string(),
            f6(report.accuracy),
            f6(report.precision),
            f6(report.recall),
            f6(report.f1),
        ])?;
        Ok(())
    })
}
