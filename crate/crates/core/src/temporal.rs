//! Temporal burstiness metrics over per-MP daily series.
//!
//! Three views of "how concentrated in time is the attention an MP gets":
//! the focus window (the longest stretch of days whose average strictly
//! beats the series average, and how much of the total it holds), churn
//! (how much the set of in-focus MPs turns over between consecutive time
//! slices), and the Gini coefficient of per-MP volume within a slice.
//!
//! All three are scale invariant, which has a convenient consequence: the
//! corrected-replies channel (reply counts scaled by the corpus abuse
//! proportion) produces identical focus windows, churn, and Gini values to
//! the raw reply channel. The correction is kept as a separate channel
//! anyway because it is the honest way to label what the numbers estimate,
//! and a property test pins the equivalence down.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::corpus_ingest::DailySeries;

/// Which daily count stream a metric runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Replies classified abusive at the recipient.
    Abuse,
    /// All replies.
    AllReplies,
    /// Reply counts scaled by the corpus-wide abuse proportion: an
    /// expected-abuse estimate that removes classifier quirks from
    /// magnitudes while preserving temporal shape.
    CorrectedReplies,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Abuse => "abuse",
            Channel::AllReplies => "all_replies",
            Channel::CorrectedReplies => "corrected_replies",
        })
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abuse" => Ok(Channel::Abuse),
            "all_replies" => Ok(Channel::AllReplies),
            "corrected_replies" => Ok(Channel::CorrectedReplies),
            other => Err(format!("unknown channel: {other}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("series for {handle} is empty")]
    EmptySeries { handle: String },
    #[error("series for {handle} is all zeros on the requested channel")]
    AllZero { handle: String },
    #[error("no series to analyze")]
    NoSeries,
    #[error("daily series are misaligned: {0}")]
    Misaligned(String),
    #[error("slice of {slice_days} days does not fit a {days}-day window")]
    BadSliceDays { slice_days: usize, days: usize },
    #[error("cannot take the Gini of an empty slice")]
    EmptySlice,
    #[error("Gini input must be finite and non-negative, got {0}")]
    BadValue(f64),
    #[error("corpus abuse proportion must be a finite non-negative number, got {0}")]
    BadProportion(f64),
    #[error("burstiness report needs at least 2 MPs with non-zero abuse, got {0}")]
    InsufficientData(usize),
}

/// The focus window of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusResult {
    /// Inclusive day-index range of the window.
    pub window: (usize, usize),
    /// Share of the series total that falls inside the window.
    pub focus: f64,
    /// Focus scaled by D / window length: 1 for a perfectly uniform
    /// series, above 1 when attention is concentrated.
    pub normalized_focus: f64,
    /// The daily mean the window had to beat, in channel units.
    pub threshold: f64,
}

fn channel_counts(series: &DailySeries, channel: Channel) -> &[u32] {
    match channel {
        Channel::Abuse => &series.abuse_counts,
        Channel::AllReplies | Channel::CorrectedReplies => &series.reply_counts,
    }
}

/// Compute the focus window of a daily series on the given channel.
///
/// The window is the longest contiguous run of days whose sum strictly
/// exceeds the uniform expectation (series mean times run length); among
/// equally long runs the earliest wins. A series with no qualifying run is
/// uniform by this definition: the window is the whole period and both
/// focus values are exactly 1. An all-zero series has no meaningful window
/// and is an error.
///
/// `corpus_abuse_proportion` only matters for the corrected channel, where
/// it scales reply counts. Scaling by a positive constant provably moves
/// neither the window nor the focus ratios, so the computation runs on raw
/// counts and the proportion only shows up in the reported threshold.
pub fn focus(
    series: &DailySeries,
    channel: Channel,
    corpus_abuse_proportion: f64,
) -> Result<FocusResult, TemporalError> {
    if !corpus_abuse_proportion.is_finite() || corpus_abuse_proportion < 0.0 {
        return Err(TemporalError::BadProportion(corpus_abuse_proportion));
    }
    let counts = channel_counts(series, channel);
    if counts.is_empty() {
        return Err(TemporalError::EmptySeries {
            handle: series.handle.clone(),
        });
    }
    let scale = match channel {
        Channel::CorrectedReplies => corpus_abuse_proportion,
        _ => 1.0,
    };
    if scale == 0.0 {
        // Scaling by zero zeroes the whole series.
        return Err(TemporalError::AllZero {
            handle: series.handle.clone(),
        });
    }
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(TemporalError::AllZero {
            handle: series.handle.clone(),
        });
    }
    let d = counts.len();
    let (window, focus, normalized_focus) = focus_window(counts, total);
    Ok(FocusResult {
        window,
        focus,
        normalized_focus,
        threshold: scale * total as f64 / d as f64,
    })
}

/// Core window search, exact in integer arithmetic.
///
/// "sum(R) > mean * |R|" is evaluated as "D * sum(R) > total * |R|", which
/// avoids ever comparing rounded floats. With W[j] = D * prefix[j] -
/// total * j the condition for the run (i, j] becomes W[j] > W[i]; the
/// longest such pair is found by scanning j in order against the prefix
/// minima of W, which are non-increasing and therefore binary-searchable.
fn focus_window(counts: &[u32], total: u64) -> ((usize, usize), f64, f64) {
    let d = counts.len();
    let mut w = Vec::with_capacity(d + 1);
    let mut prefix: i128 = 0;
    w.push(0i128);
    for (j, &c) in counts.iter().enumerate() {
        prefix += c as i128;
        w.push(d as i128 * prefix - total as i128 * (j as i128 + 1));
    }
    // mins[i] = min(w[0..=i]); non-increasing by construction.
    let mut mins = Vec::with_capacity(d + 1);
    let mut running = w[0];
    for &x in &w {
        running = running.min(x);
        mins.push(running);
    }
    let mut best: Option<(usize, usize)> = None; // (length, start)
    for j in 1..=d {
        let i = mins[..j].partition_point(|&m| m >= w[j]);
        if i < j {
            let len = j - i;
            if best.is_none_or(|(bl, _)| len > bl) {
                best = Some((len, i));
            }
        }
    }
    match best {
        Some((len, start)) => {
            let in_window: u64 = counts[start..start + len].iter().map(|&c| c as u64).sum();
            let focus = in_window as f64 / total as f64;
            let normalized = focus * d as f64 / len as f64;
            ((start, start + len - 1), focus, normalized)
        }
        None => ((0, d - 1), 1.0, 1.0),
    }
}

/// How slices tile the window for churn and Gini.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMode {
    /// Disjoint consecutive slices; a shorter final slice is kept.
    Tiled,
    /// Every length-k window, advancing one day at a time.
    Sliding,
}

fn slice_bounds(days: usize, slice_days: usize, mode: SliceMode) -> Vec<(usize, usize)> {
    match mode {
        SliceMode::Tiled => (0..days)
            .step_by(slice_days)
            .map(|s| (s, (s + slice_days).min(days)))
            .collect(),
        SliceMode::Sliding => (0..=days - slice_days)
            .map(|s| (s, s + slice_days))
            .collect(),
    }
}

/// Turnover of the in-focus MP set between two consecutive slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnPoint {
    /// Index of the earlier slice of the pair.
    pub slice_index: usize,
    /// |A xor B| / |A union B|; 0 when both sets are empty.
    pub churn: f64,
    pub active_before: usize,
    pub active_after: usize,
}

fn validate_aligned(series: &BTreeMap<String, DailySeries>) -> Result<usize, TemporalError> {
    let mut iter = series.values();
    let first = iter.next().ok_or(TemporalError::NoSeries)?;
    for s in iter {
        if s.start_date != first.start_date || s.days() != first.days() {
            return Err(TemporalError::Misaligned(format!(
                "{} does not align with {}",
                s.handle, first.handle
            )));
        }
    }
    Ok(first.days())
}

/// Churn of the focus-active MP set across consecutive slices.
///
/// An MP is active in a slice when their focus window overlaps it. MPs
/// whose series is all zeros on the channel have no window and are active
/// nowhere; they drag churn toward 0 in neither direction since they never
/// enter a set.
pub fn churn_series(
    series: &BTreeMap<String, DailySeries>,
    channel: Channel,
    slice_days: usize,
    mode: SliceMode,
) -> Result<Vec<ChurnPoint>, TemporalError> {
    let days = validate_aligned(series)?;
    if slice_days == 0 || slice_days > days {
        return Err(TemporalError::BadSliceDays { slice_days, days });
    }
    let mut windows: Vec<(&str, (usize, usize))> = Vec::new();
    for (handle, s) in series {
        match focus(s, channel, 1.0) {
            Ok(r) => windows.push((handle.as_str(), r.window)),
            Err(TemporalError::AllZero { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let slices = slice_bounds(days, slice_days, mode);
    let active: Vec<BTreeSet<&str>> = slices
        .iter()
        .map(|&(lo, hi)| {
            windows
                .iter()
                .filter(|&&(_, (ws, we))| ws < hi && we >= lo)
                .map(|&(h, _)| h)
                .collect()
        })
        .collect();
    Ok(active
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (a, b) = (&pair[0], &pair[1]);
            let union = a.union(b).count();
            let sym_diff = a.symmetric_difference(b).count();
            ChurnPoint {
                slice_index: i,
                churn: if union == 0 {
                    0.0
                } else {
                    sym_diff as f64 / union as f64
                },
                active_before: a.len(),
                active_after: b.len(),
            }
        })
        .collect())
}

/// Gini coefficient of a non-negative sample; 0 for an all-zero sample.
///
/// Computed with the sorted-form identity, with the denominator arranged
/// as n * sum so integer-count inputs divide exactly.
pub fn gini_slice(values: &[f64]) -> Result<f64, TemporalError> {
    if values.is_empty() {
        return Err(TemporalError::EmptySlice);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(TemporalError::BadValue(bad));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut num = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        num += (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * x;
    }
    Ok(num / (n as f64 * total))
}

/// Per-slice Gini of per-MP volume.
#[derive(Debug, Clone, PartialEq)]
pub struct GiniPoint {
    pub slice_index: usize,
    pub gini: f64,
}

/// Gini of per-MP channel volume within each slice. Every MP participates,
/// including those with zero volume; inequality between the flooded and the
/// ignored is the point of the measure.
pub fn gini_points(
    series: &BTreeMap<String, DailySeries>,
    channel: Channel,
    slice_days: usize,
    mode: SliceMode,
) -> Result<Vec<GiniPoint>, TemporalError> {
    let days = validate_aligned(series)?;
    if slice_days == 0 || slice_days > days {
        return Err(TemporalError::BadSliceDays { slice_days, days });
    }
    let slices = slice_bounds(days, slice_days, mode);
    slices
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let volumes: Vec<f64> = series
                .values()
                .map(|s| {
                    channel_counts(s, channel)[lo..hi]
                        .iter()
                        .map(|&c| c as f64)
                        .sum()
                })
                .collect();
            Ok(GiniPoint {
                slice_index: i,
                gini: gini_slice(&volumes)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Churn,
    Gini,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Churn => "churn",
            Metric::Gini => "gini",
        })
    }
}

/// Five-number summary of one metric at one slice size on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotRow {
    pub channel: Channel,
    pub metric: Metric,
    pub slice_days: usize,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of a sorted sample (the R type-7 default).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

fn boxplot(channel: Channel, metric: Metric, slice_days: usize, mut values: Vec<f64>) -> Option<BoxplotRow> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    Some(BoxplotRow {
        channel,
        metric,
        slice_days,
        n: values.len(),
        min: values[0],
        q1: quantile_sorted(&values, 0.25),
        median: quantile_sorted(&values, 0.5),
        q3: quantile_sorted(&values, 0.75),
        max: values[values.len() - 1],
    })
}

/// Distribution summaries of churn and Gini per slice size, on the abuse
/// and corrected channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstinessReport {
    pub rows: Vec<BoxplotRow>,
}

/// Sweep slice sizes and summarize churn and Gini distributions.
///
/// Needs at least two MPs with non-zero abuse series to say anything about
/// turnover or inequality. Slice sizes larger than the window, and metrics
/// with no data points at a size (churn needs at least two slices), are
/// skipped rather than fabricated.
pub fn burstiness_report(
    series: &BTreeMap<String, DailySeries>,
    slice_sizes: std::ops::RangeInclusive<usize>,
    mode: SliceMode,
) -> Result<BurstinessReport, TemporalError> {
    let days = validate_aligned(series)?;
    let nonzero = series
        .values()
        .filter(|s| s.abuse_counts.iter().any(|&c| c > 0))
        .count();
    if nonzero < 2 {
        return Err(TemporalError::InsufficientData(nonzero));
    }
    let mut rows = Vec::new();
    for channel in [Channel::Abuse, Channel::CorrectedReplies] {
        for slice_days in slice_sizes.clone() {
            if slice_days == 0 || slice_days > days {
                continue;
            }
            let churn_values: Vec<f64> = churn_series(series, channel, slice_days, mode)?
                .into_iter()
                .map(|p| p.churn)
                .collect();
            if let Some(row) = boxplot(channel, Metric::Churn, slice_days, churn_values) {
                rows.push(row);
            }
            let gini_values: Vec<f64> = gini_points(series, channel, slice_days, mode)?
                .into_iter()
                .map(|p| p.gini)
                .collect();
            if let Some(row) = boxplot(channel, Metric::Gini, slice_days, gini_values) {
                rows.push(row);
            }
        }
    }
    Ok(BurstinessReport { rows })
}
