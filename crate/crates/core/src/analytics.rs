//! Dataset-scale descriptive reports: candidate counts, score and precision
//! distributions, pipeline quality, and score stability over time.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::checks::{classify_pipeline, CheckCategory};
use crate::confidence::{ci_precision, posterior_params};
use crate::datasets::{
    ci_conclusion, is_candidate_update, CiConclusion, CountSeries, ThreeTupleDataset, Timestamp, TupleKey,
    UpdateEvent,
};
use crate::learn::median;
use crate::scoring::{Score, BADGE_MIN_CANDIDATES};

pub const DEFAULT_BINS: usize = 20;
/// Scores strictly above this share are "high" (as a ratio num/den).
pub const HIGH_SCORE: (u64, u64) = (9, 10);
pub const WIDE_PRECISION: f64 = 0.15;
/// Absolute band, on the 0..1 scale, around the final score.
pub const STABILITY_BAND: f64 = 0.05;
const BAND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no keys with at least {0} candidate updates")]
    NoQualifyingKeys(u64),
    #[error("no candidate-update events with CI checks")]
    NoEligibleEvents,
    #[error("no key has two or more timestamped snapshots")]
    NoSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
    pub summary: Summary,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Histogram {
    /// Equal-width bins over `range`, or over the data's own min..max. The
    /// last bin is closed on the right. `values` must be non-empty.
    pub fn new(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Histogram {
        assert!(!values.is_empty(), "histogram of no values");
        let bins = bins.max(1);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let (lo, mut hi) = range.unwrap_or((min, max));
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let bin = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[bin] += 1;
        }
        Histogram {
            edges,
            counts,
            total: values.len(),
            summary: Summary {
                min,
                q1: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q3: quantile(&sorted, 0.75),
                max,
            },
        }
    }
}

fn share(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCountReport {
    pub histogram: Histogram,
    pub share_at_least_5: f64,
}

pub fn candidate_count_report(
    dataset: &ThreeTupleDataset,
    bins: usize,
) -> Result<CandidateCountReport, AnalyticsError> {
    if dataset.is_empty() {
        return Err(AnalyticsError::EmptyDataset);
    }
    let counts: Vec<f64> = dataset.records().map(|r| r.candidate_updates as f64).collect();
    let enough = dataset
        .records()
        .filter(|r| r.candidate_updates >= BADGE_MIN_CANDIDATES)
        .count();
    Ok(CandidateCountReport {
        histogram: Histogram::new(&counts, bins, None),
        share_at_least_5: share(enough, counts.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDistributionReport {
    pub min_candidates: u64,
    pub histogram: Histogram,
    /// Strictly above 0.90.
    pub share_above_90: f64,
}

pub fn score_distribution_report(
    dataset: &ThreeTupleDataset,
    min_candidates: u64,
    bins: usize,
) -> Result<ScoreDistributionReport, AnalyticsError> {
    let scores: Vec<Score> = dataset
        .records()
        .filter(|r| r.candidate_updates >= min_candidates.max(1))
        .filter_map(|r| Score::new(r.successful_updates, r.candidate_updates))
        .collect();
    if scores.is_empty() {
        return Err(AnalyticsError::NoQualifyingKeys(min_candidates));
    }
    let high = scores.iter().filter(|s| s.exceeds(HIGH_SCORE.0, HIGH_SCORE.1)).count();
    let values: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    Ok(ScoreDistributionReport {
        min_candidates,
        histogram: Histogram::new(&values, bins, Some((0.0, 1.0))),
        share_above_90: share(high, values.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionReport {
    pub min_candidates: u64,
    pub histogram: Histogram,
    pub share_above_15: f64,
    pub per_key: Vec<(TupleKey, f64)>,
}

pub fn precision_distribution_report(
    dataset: &ThreeTupleDataset,
    min_candidates: u64,
    bins: usize,
) -> Result<PrecisionReport, AnalyticsError> {
    let per_key: Vec<(TupleKey, f64)> = dataset
        .records()
        .filter(|r| r.candidate_updates >= min_candidates.max(1))
        .filter_map(|r| {
            posterior_params(r.candidate_updates, r.successful_updates)
                .ok()
                .map(|p| (r.key.clone(), ci_precision(p)))
        })
        .collect();
    if per_key.is_empty() {
        return Err(AnalyticsError::NoQualifyingKeys(min_candidates));
    }
    let values: Vec<f64> = per_key.iter().map(|(_, p)| *p).collect();
    let wide = values.iter().filter(|&&p| p > WIDE_PRECISION).count();
    Ok(PrecisionReport {
        min_candidates,
        histogram: Histogram::new(&values, bins, Some((0.0, 0.5))),
        share_above_15: share(wide, values.len()),
        per_key,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub eligible_events: usize,
    pub median_check_count: f64,
    pub share_has_build_or_test: f64,
    pub share_has_useless: f64,
    pub share_useless_only: f64,
    /// CI success rate among useless-only pipelines, if any.
    pub success_rate_useless_only: Option<f64>,
    /// CI success rate among pipelines with a build check, if any.
    pub success_rate_has_build: Option<f64>,
    pub category_counts: BTreeMap<CheckCategory, usize>,
    pub total_checks: usize,
}

/// Pipeline make-up over candidate updates.
pub fn pipeline_quality_report(events: &[UpdateEvent]) -> Result<PipelineReport, AnalyticsError> {
    let eligible: Vec<&UpdateEvent> = events.iter().filter(|e| is_candidate_update(e)).collect();
    if eligible.is_empty() {
        return Err(AnalyticsError::NoEligibleEvents);
    }
    let n = eligible.len();
    let mut counts = Vec::with_capacity(n);
    let mut category_counts: BTreeMap<CheckCategory, usize> = BTreeMap::new();
    let (mut bt, mut useless, mut only) = (0, 0, 0);
    let (mut only_ok, mut build, mut build_ok) = (0, 0, 0);
    for ev in &eligible {
        let q = classify_pipeline(ev);
        let ok = ci_conclusion(ev) == CiConclusion::Success;
        counts.push(q.check_count as f64);
        for (cat, c) in &q.categories {
            *category_counts.entry(*cat).or_default() += c;
        }
        bt += q.has_build_or_test as usize;
        useless += q.has_useless as usize;
        if q.useless_only {
            only += 1;
            only_ok += ok as usize;
        }
        if q.has_build {
            build += 1;
            build_ok += ok as usize;
        }
    }
    Ok(PipelineReport {
        eligible_events: n,
        median_check_count: median(&counts),
        share_has_build_or_test: share(bt, n),
        share_has_useless: share(useless, n),
        share_useless_only: share(only, n),
        success_rate_useless_only: (only > 0).then(|| share(only_ok, only)),
        success_rate_has_build: (build > 0).then(|| share(build_ok, build)),
        total_checks: category_counts.values().sum(),
        category_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub key: TupleKey,
    pub instantly_stable: bool,
    pub stable_at: Timestamp,
    /// Index of the snapshot from which the score stays in band.
    pub stable_index: usize,
    pub snapshots: usize,
}

/// Index of the first snapshot after the last out-of-band one (0 when every
/// snapshot is within the band of the final score). `None` for fewer than
/// two snapshots.
pub fn stable_index(scores: &[f64]) -> Option<usize> {
    let (&last, _) = scores.split_last()?;
    if scores.len() < 2 {
        return None;
    }
    let violation = scores
        .iter()
        .rposition(|s| (s - last).abs() > STABILITY_BAND + BAND_SLACK);
    Some(violation.map_or(0, |i| i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub verdicts: Vec<StabilityVerdict>,
    pub excluded_single_snapshot: usize,
    pub instantly_stable_share: f64,
}

/// Per-key stability for time-ordered `(time, score)` series.
pub fn stability_analysis(
    series: &BTreeMap<TupleKey, Vec<(Timestamp, f64)>>,
) -> Result<StabilityReport, AnalyticsError> {
    let mut verdicts = Vec::new();
    let mut excluded = 0;
    for (key, points) in series {
        let scores: Vec<f64> = points.iter().map(|p| p.1).collect();
        match stable_index(&scores) {
            None => excluded += 1,
            Some(i) => verdicts.push(StabilityVerdict {
                key: key.clone(),
                instantly_stable: i == 0,
                stable_at: points[i].0,
                stable_index: i,
                snapshots: points.len(),
            }),
        }
    }
    if verdicts.is_empty() {
        return Err(AnalyticsError::NoSeries);
    }
    let instant = verdicts.iter().filter(|v| v.instantly_stable).count();
    Ok(StabilityReport {
        instantly_stable_share: share(instant, verdicts.len()),
        excluded_single_snapshot: excluded,
        verdicts,
    })
}

/// Convert raw snapshot count series into score series.
pub fn score_series(
    counts: &CountSeries,
) -> BTreeMap<TupleKey, Vec<(Timestamp, f64)>> {
    counts
        .iter()
        .map(|(k, pts)| {
            (
                k.clone(),
                pts.iter()
                    .filter_map(|&(t, s, n)| Score::new(s, n).map(|sc| (t, sc.value())))
                    .collect(),
            )
        })
        .collect()
}

/// Delimited-text rendering: a bin table, a blank line, then `metric,value` rows.
pub trait DelimitedReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()>;
}

fn write_bins(out: &mut dyn Write, h: &Histogram) -> io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{}", h.edges[i], h.edges[i + 1], c)?;
    }
    writeln!(out)?;
    writeln!(out, "metric,value")?;
    writeln!(out, "total,{}", h.total)?;
    let s = &h.summary;
    writeln!(out, "min,{}", s.min)?;
    writeln!(out, "q1,{}", s.q1)?;
    writeln!(out, "median,{}", s.median)?;
    writeln!(out, "q3,{}", s.q3)?;
    writeln!(out, "max,{}", s.max)
}

impl DelimitedReport for CandidateCountReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()> {
        write_bins(out, &self.histogram)?;
        writeln!(out, "share_at_least_5,{}", self.share_at_least_5)
    }
}

impl DelimitedReport for ScoreDistributionReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()> {
        write_bins(out, &self.histogram)?;
        writeln!(out, "min_candidates,{}", self.min_candidates)?;
        writeln!(out, "share_above_90,{}", self.share_above_90)
    }
}

impl DelimitedReport for PrecisionReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()> {
        write_bins(out, &self.histogram)?;
        writeln!(out, "min_candidates,{}", self.min_candidates)?;
        writeln!(out, "share_above_15,{}", self.share_above_15)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DelimitedReport for PipelineReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{:<18}{:>10}{:>10}", "category", "checks", "percent")?;
        for cat in CheckCategory::ALL {
            let c = self.category_counts.get(&cat).copied().unwrap_or(0);
            let pct = 100.0 * share(c, self.total_checks);
            writeln!(out, "{:<18}{:>10}{:>9.1}%", cat.as_str(), c, pct)?;
        }
        writeln!(out)?;
        writeln!(out, "metric,value")?;
        writeln!(out, "eligible_events,{}", self.eligible_events)?;
        writeln!(out, "total_checks,{}", self.total_checks)?;
        writeln!(out, "median_check_count,{}", self.median_check_count)?;
        writeln!(out, "share_has_build_or_test,{}", self.share_has_build_or_test)?;
        writeln!(out, "share_has_useless,{}", self.share_has_useless)?;
        writeln!(out, "share_useless_only,{}", self.share_useless_only)?;
        writeln!(out, "success_rate_useless_only,{}", opt(self.success_rate_useless_only))?;
        writeln!(out, "success_rate_has_build,{}", opt(self.success_rate_has_build))
    }
}

impl DelimitedReport for StabilityReport {
    fn write_delimited(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record([
            "provider",
            "ecosystem",
            "origin_version",
            "target_version",
            "snapshots",
            "instantly_stable",
            "stable_index",
            "stable_at",
        ])?;
        for v in &self.verdicts {
            w.write_record([
                v.key.provider.clone(),
                v.key.ecosystem.clone(),
                v.key.origin.clone(),
                v.key.target.clone(),
                v.snapshots.to_string(),
                v.instantly_stable.to_string(),
                v.stable_index.to_string(),
                v.stable_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            ])?;
        }
        w.flush()?;
        drop(w);
        writeln!(out)?;
        writeln!(out, "metric,value")?;
        writeln!(out, "keys,{}", self.verdicts.len())?;
        writeln!(out, "excluded_single_snapshot,{}", self.excluded_single_snapshot)?;
        writeln!(out, "instantly_stable_share,{}", self.instantly_stable_share)
    }
}
