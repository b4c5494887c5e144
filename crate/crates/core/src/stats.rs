//! Per-MP summaries, group comparisons, and the statistical tests behind
//! them.
//!
//! Both tests are exact where it matters. Mann-Whitney switches to an exact
//! permutation distribution whenever the smaller sample has at most eight
//! observations, computed by a counting DP rather than literal enumeration
//! (choose(1008, 8) subsets is far beyond enumerating, but the distribution
//! of rank sums fits in a small table). Fisher's test sums hypergeometric
//! point probabilities in log space with a tiny relative slack on the
//! "as extreme" comparison so that equal-probability tables on the other
//! tail are never lost to rounding.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

use crate::abuse_engine::{AbuseType, Classification};
use crate::corpus_ingest::DailySeries;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample for group {0}")]
    EmptySample(String),
    #[error("contingency table is all zeros")]
    EmptyTable,
    #[error("monthly trend needs at least 2 months, got {0}")]
    InsufficientMonths(usize),
    #[error("daily series are misaligned: {0}")]
    MisalignedSeries(String),
}

/// Which test produced a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    MannWhitney,
    FisherExact,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestKind::MannWhitney => "mann_whitney",
            TestKind::FisherExact => "fisher_exact",
        })
    }
}

/// Result of comparing two groups of per-MP abuse percentages.
#[derive(Debug, Clone)]
pub struct GroupComparison {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub test: TestKind,
}

/// Doubled midranks of the pooled sample, in input order. Doubling keeps
/// midranks integral (a tie between ranks 3 and 4 has midrank 3.5), which
/// the exact distribution DP depends on.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j (1-based); doubled midrank = first + last.
        let doubled = (i + 1 + j) as u64;
        for &idx in &order[i..j] {
            ranks[idx] = doubled;
        }
        i = j;
    }
    ranks
}

/// Two-sided Mann-Whitney U test.
///
/// Returns `(U, p)` where U is the smaller of the two U statistics. With
/// min(n_a, n_b) <= 8 the p-value is exact: the null distribution of the
/// smaller sample's rank sum is built by counting, over the observed pooled
/// ranks (ties included), how many size-m subsets reach each sum. The
/// two-sided p doubles the smaller tail, capped at 1. Larger samples use
/// the normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<(f64, f64), StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a".into()));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b".into()));
    }
    let na = a.len();
    let nb = b.len();
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = doubled_midranks(&pooled);

    let r_a_doubled: u64 = ranks[..na].iter().sum();
    let u_a = r_a_doubled as f64 / 2.0 - (na as f64 * (na as f64 + 1.0)) / 2.0;
    let u_b = na as f64 * nb as f64 - u_a;
    let u = u_a.min(u_b);

    let m = na.min(nb);
    let p = if m <= 8 {
        let r_small: u64 = if na <= nb {
            r_a_doubled
        } else {
            ranks[na..].iter().sum()
        };
        exact_rank_sum_p(&ranks, m, r_small)
    } else {
        approx_p(&pooled, na, nb, u)
    };
    Ok((u, p))
}

/// Exact two-sided p for the rank sum of the smaller sample: tail counts
/// from the distribution of size-m subset sums of the pooled doubled ranks.
fn exact_rank_sum_p(doubled_ranks: &[u64], m: usize, observed: u64) -> f64 {
    let max_sum: u64 = {
        let mut sorted: Vec<u64> = doubled_ranks.to_vec();
        sorted.sort_unstable_by(|x, y| y.cmp(x));
        sorted.iter().take(m).sum()
    };
    // ways[k][s] = number of size-k subsets with doubled-rank sum s.
    let mut ways = vec![vec![0u128; max_sum as usize + 1]; m + 1];
    ways[0][0] = 1;
    for &r in doubled_ranks {
        for k in (1..=m).rev() {
            for s in (r..=max_sum).rev() {
                let from = ways[k - 1][(s - r) as usize];
                if from > 0 {
                    ways[k][s as usize] += from;
                }
            }
        }
    }
    let dist = &ways[m];
    let total: u128 = dist.iter().sum();
    let le: u128 = dist[..=(observed as usize).min(max_sum as usize)]
        .iter()
        .sum();
    let ge: u128 = if observed as usize > max_sum as usize {
        0
    } else {
        dist[observed as usize..].iter().sum()
    };
    let tail = le.min(ge);
    (2.0 * (tail as f64 / total as f64)).min(1.0)
}

fn approx_p(pooled: &[f64], na: usize, nb: usize, u: f64) -> f64 {
    let n = (na + nb) as f64;
    let mean = na as f64 * nb as f64 / 2.0;
    // Tie correction sums t^3 - t over tie groups of the pooled sample.
    let mut sorted = pooled.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_sum += t * t * t - t;
        i = j;
    }
    let variance =
        (na as f64 * nb as f64 / 12.0) * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0; // every pooled value identical
    }
    let z = (u - mean + 0.5) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

/// Two-sided Fisher exact test on a 2x2 table `[[a, b], [c, d]]`.
///
/// Returns `(odds_ratio, p)`. The p-value sums, over the hypergeometric
/// support with the observed margins, every table whose point probability
/// is at most the observed one, compared with a relative slack of 1e-7 so
/// the mirror table of a symmetric layout is never dropped by log-space
/// rounding. The slack is far below the smallest possible relative gap
/// between genuinely different point probabilities at the table sizes the
/// pipeline produces, so it only ever re-admits true ties.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Result<(f64, f64), StatsError> {
    let [[a, b], [c, d]] = table;
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let n = r1 + r2;
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }

    let ln_choose = |n: u64, k: u64| -> f64 {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    };
    let ln_p_of = |x: u64| -> f64 {
        ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_choose(n, c1)
    };

    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);
    let ln_obs = ln_p_of(a);
    let cutoff = ln_obs + 1e-7_f64.ln_1p();
    let mut p = 0.0;
    for x in lo..=hi {
        let ln_px = ln_p_of(x);
        if ln_px <= cutoff {
            p += ln_px.exp();
        }
    }
    let p = p.min(1.0);

    let odds_ratio = if b * c == 0 {
        if a * d == 0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        (a as f64 * d as f64) / (b as f64 * c as f64)
    };
    Ok((odds_ratio, p))
}

/// Compare two groups of per-MP abuse percentages with Mann-Whitney.
pub fn compare_groups(
    group_a: &str,
    sample_a: &[f64],
    group_b: &str,
    sample_b: &[f64],
) -> Result<GroupComparison, StatsError> {
    if sample_a.is_empty() {
        return Err(StatsError::EmptySample(group_a.into()));
    }
    if sample_b.is_empty() {
        return Err(StatsError::EmptySample(group_b.into()));
    }
    let (statistic, p_value) = mann_whitney(sample_a, sample_b)?;
    Ok(GroupComparison {
        group_a: group_a.to_string(),
        group_b: group_b.to_string(),
        n_a: sample_a.len(),
        n_b: sample_b.len(),
        statistic,
        p_value,
        test: TestKind::MannWhitney,
    })
}

/// Abuse received by one MP over the whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct MPSummary {
    pub handle: String,
    pub replies_total: u64,
    pub abusive_total: u64,
    /// Percentage (0 to 100); zero when the MP received no replies.
    pub abuse_pct: f64,
    pub sexist: u64,
    pub racist: u64,
    pub antisemitic: u64,
    pub islamophobic: u64,
    pub homophobic: u64,
    pub political: u64,
    /// Racist-typed replies whose largest window has >= 3 components.
    pub strong_racist_count: u64,
    /// Abusive replies of any type whose largest window has >= 4 components.
    pub strong_any_count: u64,
}

impl MPSummary {
    fn empty(handle: String) -> MPSummary {
        MPSummary {
            handle,
            replies_total: 0,
            abusive_total: 0,
            abuse_pct: 0.0,
            sexist: 0,
            racist: 0,
            antisemitic: 0,
            islamophobic: 0,
            homophobic: 0,
            political: 0,
            strong_racist_count: 0,
            strong_any_count: 0,
        }
    }
}

/// Streaming builder for per-MP summaries. Observation order never affects
/// the result; everything is counting.
#[derive(Debug, Default)]
pub struct SummaryAccumulator {
    map: BTreeMap<String, MPSummary>,
}

impl SummaryAccumulator {
    /// Seed with every known MP so silent ones still appear in the output.
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(handles: I) -> SummaryAccumulator {
        let map = handles
            .into_iter()
            .map(|h| (h.to_string(), MPSummary::empty(h.to_string())))
            .collect();
        SummaryAccumulator { map }
    }

    pub fn observe(&mut self, mp: &str, classification: &Classification) {
        let entry = self
            .map
            .entry(mp.to_string())
            .or_insert_with(|| MPSummary::empty(mp.to_string()));
        entry.replies_total += 1;
        if !classification.abusive {
            return;
        }
        entry.abusive_total += 1;
        let types = classification.types();
        for t in &types {
            match t {
                AbuseType::Sexist => entry.sexist += 1,
                AbuseType::Racist => entry.racist += 1,
                AbuseType::Antisemitic => entry.antisemitic += 1,
                AbuseType::Islamophobic => entry.islamophobic += 1,
                AbuseType::Homophobic => entry.homophobic += 1,
                AbuseType::Political => entry.political += 1,
                AbuseType::Untyped => {}
            }
        }
        if types.contains(&AbuseType::Racist) && classification.max_components >= 3 {
            entry.strong_racist_count += 1;
        }
        if classification.max_components >= 4 {
            entry.strong_any_count += 1;
        }
    }

    pub fn finish(self) -> Vec<MPSummary> {
        self.map
            .into_values()
            .map(|mut s| {
                if s.replies_total > 0 {
                    s.abuse_pct = 100.0 * s.abusive_total as f64 / s.replies_total as f64;
                }
                s
            })
            .collect()
    }
}

/// Abusive-reply counts per topic per month, shaped for rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    /// Distinct months in ascending order, formatted YYYY-MM.
    pub months: Vec<String>,
    pub rows: Vec<HeatmapRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapRow {
    pub topic: String,
    /// One count per entry of `Heatmap::months`.
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Shape (topic, month) counts into a heatmap: rows sorted by total
/// descending, ties alphabetically, with zero-filled gaps.
pub fn topic_heatmap(cells: &BTreeMap<(String, String), u64>) -> Heatmap {
    let months: Vec<String> = {
        let mut m: Vec<String> = cells
            .keys()
            .map(|(_, month)| month.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        m.sort();
        m
    };
    let month_index: BTreeMap<&str, usize> = months
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let mut by_topic: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for ((topic, month), count) in cells {
        let row = by_topic
            .entry(topic.as_str())
            .or_insert_with(|| vec![0; months.len()]);
        row[month_index[month.as_str()]] += count;
    }
    let mut rows: Vec<HeatmapRow> = by_topic
        .into_iter()
        .map(|(topic, counts)| {
            let total = counts.iter().sum();
            HeatmapRow {
                topic: topic.to_string(),
                counts,
                total,
            }
        })
        .collect();
    rows.sort_by(|x, y| y.total.cmp(&x.total).then_with(|| x.topic.cmp(&y.topic)));
    Heatmap { months, rows }
}

/// One month of the corpus-wide abuse trend.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthRow {
    pub month: String,
    pub abusive: u64,
    pub clean: u64,
    pub replies: u64,
    /// Percentage of replies that were abusive, 0 for an empty month.
    pub pct: f64,
    /// Fisher p against the previous month; None for the first month.
    pub p_vs_prev: Option<f64>,
    /// True when the rise from the previous month is significant at 0.001.
    pub rising: bool,
}

pub(crate) fn month_key(date: chrono::NaiveDate) -> String {
    use chrono::Datelike;
    format!("{:04}-{:02}", date.year(), date.month())
}

/// Month-over-month abuse trend from the corpus-wide daily series.
///
/// Each consecutive month pair is tested with Fisher's exact test on
/// `[[abusive_prev, clean_prev], [abusive_cur, clean_cur]]`; a month is
/// flagged rising when p < 0.001 and its abuse percentage increased. The
/// series must span at least two calendar months.
pub fn monthly_trend(aggregate: &DailySeries) -> Result<Vec<MonthRow>, StatsError> {
    let mut months: Vec<(String, u64, u64)> = Vec::new(); // (month, abusive, replies)
    for (i, (&ab, &re)) in aggregate
        .abuse_counts
        .iter()
        .zip(&aggregate.reply_counts)
        .enumerate()
    {
        let date = aggregate.start_date + chrono::Days::new(i as u64);
        let key = month_key(date);
        match months.last_mut() {
            Some((m, a, r)) if *m == key => {
                *a += ab as u64;
                *r += re as u64;
            }
            _ => months.push((key, ab as u64, re as u64)),
        }
    }
    if months.len() < 2 {
        return Err(StatsError::InsufficientMonths(months.len()));
    }
    let mut rows: Vec<MonthRow> = Vec::with_capacity(months.len());
    for (i, (month, abusive, replies)) in months.iter().enumerate() {
        let clean = replies - abusive;
        let pct = if *replies > 0 {
            100.0 * *abusive as f64 / *replies as f64
        } else {
            0.0
        };
        let (p_vs_prev, rising) = if i == 0 {
            (None, false)
        } else {
            let prev = &rows[i - 1];
            let table = [[prev.abusive, prev.clean], [*abusive, clean]];
            let p = if prev.replies == 0 && *replies == 0 {
                1.0 // no evidence either way
            } else {
                fisher_exact(table)?.1
            };
            (Some(p), p < 0.001 && pct > prev.pct)
        };
        rows.push(MonthRow {
            month: month.clone(),
            abusive: *abusive,
            clean,
            replies: *replies,
            pct,
            p_vs_prev,
            rising,
        });
    }
    Ok(rows)
}

/// Sum per-MP daily series into one corpus-wide series.
pub fn aggregate_series(
    series: &BTreeMap<String, DailySeries>,
) -> Result<DailySeries, StatsError> {
    let mut iter = series.values();
    let first = iter
        .next()
        .ok_or_else(|| StatsError::MisalignedSeries("no series".into()))?;
    let mut abuse = first.abuse_counts.clone();
    let mut replies = first.reply_counts.clone();
    for s in iter {
        if s.start_date != first.start_date || s.days() != first.days() {
            return Err(StatsError::MisalignedSeries(format!(
                "{} does not align with {}",
                s.handle, first.handle
            )));
        }
        for (dst, src) in abuse.iter_mut().zip(&s.abuse_counts) {
            *dst += src;
        }
        for (dst, src) in replies.iter_mut().zip(&s.reply_counts) {
            *dst += src;
        }
    }
    Ok(DailySeries {
        handle: "corpus".to_string(),
        start_date: first.start_date,
        abuse_counts: abuse,
        reply_counts: replies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abuse_engine::Target;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn mwu_frozen_example() {
        let (u, p) = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(u, 0.0);
        assert!((p - 1.0 / 3.0).abs() < 1e-15, "p = {p}");
    }

    #[test]
    fn mwu_identical_samples_give_p_one() {
        let (_, p) = mann_whitney(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(p, 1.0);
        let (_, p) = mann_whitney(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(p > 0.9, "p = {p}");
    }

    #[test]
    fn mwu_separated_large_samples_are_significant() {
        let a: Vec<f64> = (1..=20).map(f64::from).collect();
        let b: Vec<f64> = (101..=120).map(f64::from).collect();
        let (u, p) = mann_whitney(&a, &b).unwrap();
        assert_eq!(u, 0.0);
        assert!(p < 0.001, "p = {p}");
    }

    #[test]
    fn mwu_rejects_empty_samples() {
        assert!(mann_whitney(&[], &[1.0]).is_err());
        assert!(mann_whitney(&[1.0], &[]).is_err());
    }

    #[test]
    fn mwu_exact_branch_handles_one_huge_sample() {
        // The exact branch must not try to enumerate subsets here.
        let a = [0.5, 1.5];
        let b: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let (_, p) = mann_whitney(&a, &b).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    /// Literal subset enumeration over small pooled samples, the definition
    /// the DP is supposed to reproduce.
    fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let ranks = doubled_midranks(&pooled);
        let n = pooled.len();
        let m = a.len().min(b.len());
        let observed: u64 = if a.len() <= b.len() {
            ranks[..a.len()].iter().sum()
        } else {
            ranks[a.len()..].iter().sum()
        };
        let mut le = 0u64;
        let mut ge = 0u64;
        let mut total = 0u64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let sum: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            total += 1;
            if sum <= observed {
                le += 1;
            }
            if sum >= observed {
                ge += 1;
            }
        }
        (2.0 * (le.min(ge) as f64 / total as f64)).min(1.0)
    }

    proptest! {
        #[test]
        fn mwu_exact_dp_matches_literal_enumeration(
            a in proptest::collection::vec(0..6i32, 1..5),
            b in proptest::collection::vec(0..6i32, 1..9),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let (_, p) = mann_whitney(&a, &b).unwrap();
            prop_assert_eq!(p, enumerated_p(&a, &b));
        }

        #[test]
        fn mwu_is_symmetric_and_bounded(
            a in proptest::collection::vec(0..10i32, 1..12),
            b in proptest::collection::vec(0..10i32, 1..12),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let (u_ab, p_ab) = mann_whitney(&a, &b).unwrap();
            let (u_ba, p_ba) = mann_whitney(&b, &a).unwrap();
            prop_assert_eq!(u_ab, u_ba);
            prop_assert_eq!(p_ab, p_ba);
            prop_assert!((0.0..=1.0).contains(&p_ab));
        }
    }

    #[test]
    fn fisher_frozen_examples() {
        let (_, p) = fisher_exact([[2, 0], [0, 2]]).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-12, "p = {p}");
        let (or, p) = fisher_exact([[5, 5], [5, 5]]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((or - 1.0).abs() < 1e-12);
        let (_, p) = fisher_exact([[1, 9], [1, 9]]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_rejects_the_empty_table() {
        assert!(matches!(
            fisher_exact([[0, 0], [0, 0]]).unwrap_err(),
            StatsError::EmptyTable
        ));
    }

    #[test]
    fn fisher_agrees_with_independent_log_factorial_oracle() {
        // ln n! by direct summation, entirely separate from statrs.
        fn ln_fact(n: u64) -> f64 {
            (2..=n).map(|k| (k as f64).ln()).sum()
        }
        let table = [[50u64, 950], [10, 990]];
        let (r1, r2) = (1000u64, 1000u64);
        let c1 = 60u64;
        let n = 2000u64;
        let ln_choose = |n: u64, k: u64| ln_fact(n) - ln_fact(k) - ln_fact(n - k);
        let ln_p = |x: u64| ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_choose(n, c1);
        let obs = ln_p(50);
        let mut expected = 0.0;
        for x in 0..=60 {
            if ln_p(x) <= obs + 1e-9 {
                expected += ln_p(x).exp();
            }
        }
        let (_, p) = fisher_exact(table).unwrap();
        assert!(
            ((p - expected) / expected).abs() < 1e-9,
            "p = {p}, oracle = {expected}"
        );
        // Magnitude check: this table is deep in the significant range.
        assert!(p < 1.5e-7 && p > 0.7e-7, "p = {p}");
    }

    /// Exact rational Fisher p over small tables: point probabilities are
    /// compared by u128 cross-multiplication, no floats anywhere until the
    /// final division.
    fn rational_fisher_p(table: [[u64; 2]; 2]) -> f64 {
        fn choose(n: u64, k: u64) -> u128 {
            if k > n {
                return 0;
            }
            let k = k.min(n - k);
            let mut num: u128 = 1;
            let mut den: u128 = 1;
            for i in 0..k {
                num *= (n - i) as u128;
                den *= (i + 1) as u128;
            }
            num / den // exact: product of k consecutive integers divides k!
        }
        let [[a, b], [c, d]] = table;
        let (r1, r2, c1, n) = (a + b, c + d, a + c, a + b + c + d);
        let weight = |x: u64| choose(r1, x) * choose(r2, c1 - x);
        let obs = weight(a);
        let lo = c1.saturating_sub(r2);
        let hi = c1.min(r1);
        let mut kept: u128 = 0;
        for x in lo..=hi {
            if weight(x) <= obs {
                kept += weight(x);
            }
        }
        kept as f64 / choose(n, c1) as f64
    }

    #[test]
    fn fisher_matches_exact_rational_oracle_on_all_small_tables() {
        for total in 1..=20u64 {
            for a in 0..=total {
                for b in 0..=(total - a) {
                    for c in 0..=(total - a - b) {
                        let d = total - a - b - c;
                        let table = [[a, b], [c, d]];
                        let (_, p) = fisher_exact(table).unwrap();
                        let expected = rational_fisher_p(table);
                        assert!(
                            (p - expected).abs() < 1e-9,
                            "table {table:?}: p = {p}, exact = {expected}"
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fisher_is_transposition_invariant(
            a in 0u64..30, b in 0u64..30, c in 0u64..30, d in 0u64..30,
        ) {
            prop_assume!(a + b + c + d > 0);
            let (_, p) = fisher_exact([[a, b], [c, d]]).unwrap();
            let (_, pt) = fisher_exact([[a, c], [b, d]]).unwrap();
            prop_assert!((p - pt).abs() < 1e-12, "p = {p}, transposed = {pt}");
        }
    }

    fn classified(target: Target, types: &[(usize, AbuseType)], max_components: usize) -> Classification {
        use crate::abuse_engine::{AbuseMatch, MatchedTerm};
        use crate::lexicon::Category;
        use std::collections::BTreeSet;
        let matches = types
            .iter()
            .map(|(entry, t)| AbuseMatch {
                start: 0,
                end: 1,
                terms: vec![MatchedTerm {
                    entry: *entry,
                    category: Category::Slur,
                    start: 0,
                    end: 1,
                    plural: false,
                }],
                component_count: max_components,
                types: BTreeSet::from([*t]),
            })
            .collect::<Vec<_>>();
        Classification {
            abusive: !matches.is_empty() && target != Target::NotCounted,
            matches,
            target,
            max_components,
        }
    }

    #[test]
    fn summaries_count_types_and_strength_tiers() {
        let mut acc = SummaryAccumulator::new(["mp_one", "mp_two"]);
        acc.observe(
            "mp_one",
            &classified(Target::Recipient, &[(0, AbuseType::Racist)], 3),
        );
        acc.observe(
            "mp_one",
            &classified(Target::Recipient, &[(0, AbuseType::Sexist)], 4),
        );
        acc.observe("mp_one", &classified(Target::NotCounted, &[], 0));
        let summaries = acc.finish();
        assert_eq!(summaries.len(), 2);
        let mp_one = &summaries[0];
        assert_eq!(mp_one.handle, "mp_one");
        assert_eq!(mp_one.replies_total, 3);
        assert_eq!(mp_one.abusive_total, 2);
        assert!((mp_one.abuse_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(mp_one.racist, 1);
        assert_eq!(mp_one.sexist, 1);
        assert_eq!(mp_one.strong_racist_count, 1);
        assert_eq!(mp_one.strong_any_count, 1);
        // Seeded but silent MP stays at zero with pct 0.
        assert_eq!(summaries[1].replies_total, 0);
        assert_eq!(summaries[1].abuse_pct, 0.0);
    }

    #[test]
    fn summaries_are_observation_order_invariant() {
        use rand::prelude::*;
        let observations: Vec<(String, Classification)> = (0..40)
            .map(|i| {
                let mp = format!("mp_{}", i % 4);
                let target = match i % 3 {
                    0 => Target::Recipient,
                    1 => Target::ThirdParty,
                    _ => Target::NotCounted,
                };
                let c = classified(target, &[(0, AbuseType::Political)], i % 5);
                (mp, c)
            })
            .collect();
        let run = |obs: &[(String, Classification)]| {
            let mut acc = SummaryAccumulator::new(["mp_0", "mp_1", "mp_2", "mp_3"]);
            for (mp, c) in obs {
                acc.observe(mp, c);
            }
            acc.finish()
        };
        let baseline = run(&observations);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut shuffled = observations.clone();
            shuffled.shuffle(&mut rng);
            assert_eq!(run(&shuffled), baseline);
        }
    }

    #[test]
    fn heatmap_sorts_rows_by_total_then_topic_and_zero_fills() {
        let mut cells = BTreeMap::new();
        cells.insert(("economy".to_string(), "2019-01".to_string()), 5u64);
        cells.insert(("economy".to_string(), "2019-02".to_string()), 1);
        cells.insert(("europe/brexit".to_string(), "2019-02".to_string()), 6);
        cells.insert(("health/nhs".to_string(), "2019-01".to_string()), 6);
        let heatmap = topic_heatmap(&cells);
        assert_eq!(heatmap.months, vec!["2019-01", "2019-02"]);
        let order: Vec<&str> = heatmap.rows.iter().map(|r| r.topic.as_str()).collect();
        // economy and europe/brexit tie at 6; alphabetical order breaks it.
        assert_eq!(order, vec!["economy", "europe/brexit", "health/nhs"]);
        assert_eq!(heatmap.rows[1].counts, vec![0, 6]);
        assert_eq!(heatmap.rows[2].counts, vec![6, 0]);
    }

    fn two_month_series(jan: (u32, u32), feb: (u32, u32)) -> DailySeries {
        // 31 days of January, 28 of February, all mass on the first day.
        let mut abuse = vec![0u32; 59];
        let mut replies = vec![0u32; 59];
        abuse[0] = jan.0;
        replies[0] = jan.1;
        abuse[31] = feb.0;
        replies[31] = feb.1;
        DailySeries {
            handle: "corpus".into(),
            start_date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
            abuse_counts: abuse,
            reply_counts: replies,
        }
    }

    #[test]
    fn trend_flags_a_significant_rise_only() {
        let rows = monthly_trend(&two_month_series((10, 1000), (50, 1000))).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].month, "2019-01");
        assert_eq!(rows[0].p_vs_prev, None);
        assert!(!rows[0].rising);
        let feb = &rows[1];
        assert_eq!(feb.abusive, 50);
        assert!(feb.p_vs_prev.unwrap() < 0.001);
        assert!(feb.rising);

        // The reverse direction is significant but not a rise.
        let rows = monthly_trend(&two_month_series((50, 1000), (10, 1000))).unwrap();
        assert!(rows[1].p_vs_prev.unwrap() < 0.001);
        assert!(!rows[1].rising);
    }

    #[test]
    fn trend_identical_months_are_not_flagged() {
        let rows = monthly_trend(&two_month_series((1, 10), (1, 10))).unwrap();
        let feb = &rows[1];
        assert!((feb.p_vs_prev.unwrap() - 1.0).abs() < 1e-12);
        assert!(!feb.rising);
    }

    #[test]
    fn trend_requires_two_months() {
        let series = DailySeries {
            handle: "corpus".into(),
            start_date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
            abuse_counts: vec![1; 10],
            reply_counts: vec![5; 10],
        };
        assert!(matches!(
            monthly_trend(&series).unwrap_err(),
            StatsError::InsufficientMonths(1)
        ));
    }

    #[test]
    fn aggregate_sums_across_mps_and_validates_alignment() {
        let date = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let mut map = BTreeMap::new();
        map.insert(
            "a".to_string(),
            DailySeries::new("a".into(), date, vec![1, 0], vec![2, 1]).unwrap(),
        );
        map.insert(
            "b".to_string(),
            DailySeries::new("b".into(), date, vec![0, 3], vec![1, 4]).unwrap(),
        );
        let total = aggregate_series(&map).unwrap();
        assert_eq!(total.abuse_counts, vec![1, 3]);
        assert_eq!(total.reply_counts, vec![3, 5]);

        map.insert(
            "c".to_string(),
            DailySeries::new("c".into(), date, vec![0], vec![0]).unwrap(),
        );
        assert!(aggregate_series(&map).is_err());
    }
}
