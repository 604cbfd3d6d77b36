//! Raw and origin-version-range compatibility scores and the badge rule.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::confidence::{self, Interval};
use crate::datasets::{ScoreRecord, ThreeTupleDataset, TupleKey};
use crate::versions::{in_origin_range, parse_version, RangeLevel, Version, VersionError};

/// Candidate updates needed before the score badge is shown.
pub const BADGE_MIN_CANDIDATES: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("range scores need a parseable target: {0}")]
    UnparseableTarget(#[from] VersionError),
    #[error("exact scores are looked up by full tuple key, not aggregated over a range")]
    ExactLevelIsNotARange,
}

/// `successes / candidates` kept as an exact ratio. `candidates >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Score {
    successes: u64,
    candidates: u64,
}

impl Score {
    pub fn new(successes: u64, candidates: u64) -> Option<Score> {
        (candidates >= 1 && successes <= candidates).then_some(Score {
            successes,
            candidates,
        })
    }

    pub fn successes(self) -> u64 {
        self.successes
    }

    pub fn candidates(self) -> u64 {
        self.candidates
    }

    pub fn value(self) -> f64 {
        self.successes as f64 / self.candidates as f64
    }

    /// Whole percent, rounded half-up.
    pub fn percent(self) -> u64 {
        let (s, n) = (self.successes as u128, self.candidates as u128);
        ((200 * s + n) / (2 * n)) as u64
    }

    /// Exact `score > num / den`.
    pub fn exceeds(self, num: u64, den: u64) -> bool {
        (self.successes as u128) * (den as u128) > (num as u128) * (self.candidates as u128)
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let lhs = self.successes as u128 * other.candidates as u128;
        let rhs = other.successes as u128 * self.candidates as u128;
        Some(lhs.cmp(&rhs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Badge {
    Shown,
    Unknown,
}

impl Badge {
    pub fn for_candidates(candidates: u64) -> Badge {
        if candidates >= BADGE_MIN_CANDIDATES {
            Badge::Shown
        } else {
            Badge::Unknown
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Badge::Shown => "shown",
            Badge::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    /// For range levels the origin holds the matched pattern, e.g. `2.0.*`.
    pub key: TupleKey,
    pub level: RangeLevel,
    pub candidate_updates: u64,
    pub successful_updates: u64,
    pub score: Option<Score>,
    pub badge: Badge,
    pub interval: Option<Interval>,
    /// Records aggregated into the counts.
    pub matched_records: usize,
    /// Records skipped because their origin did not parse.
    pub excluded_unparseable: usize,
}

impl ScoreReport {
    fn from_counts(key: TupleKey, level: RangeLevel, candidates: u64, successes: u64) -> Self {
        let score = Score::new(successes, candidates);
        let interval = score.and_then(|_| confidence::interval_for_counts(candidates, successes).ok());
        ScoreReport {
            key,
            level,
            candidate_updates: candidates,
            successful_updates: successes,
            score,
            badge: Badge::for_candidates(candidates),
            interval,
            matched_records: 0,
            excluded_unparseable: 0,
        }
    }

    /// `compatibility: NN% (n=N)` when the badge is shown, otherwise
    /// `compatibility: unknown`.
    pub fn badge_text(&self) -> String {
        match (self.badge, self.score) {
            (Badge::Shown, Some(score)) => {
                format!("compatibility: {}% (n={})", score.percent(), self.candidate_updates)
            }
            _ => "compatibility: unknown".to_string(),
        }
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.badge_text())?;
        match (self.badge, self.interval) {
            (Badge::Shown, Some(i)) => write!(
                f,
                " 90% CI [{:.2}, {:.2}] badge={}",
                i.lo,
                i.hi,
                self.badge.as_str()
            ),
            _ => write!(
                f,
                " (candidates={}, successes={}) badge={}",
                self.candidate_updates,
                self.successful_updates,
                self.badge.as_str()
            ),
        }
    }
}

/// Score of one exact 3-tuple.
pub fn compatibility_score(record: &ScoreRecord) -> ScoreReport {
    let mut report = ScoreReport::from_counts(
        record.key.clone(),
        RangeLevel::Exact,
        record.candidate_updates,
        record.successful_updates,
    );
    report.matched_records = 1;
    report
}

fn range_pattern(target: &Version, level: RangeLevel) -> String {
    match level {
        RangeLevel::Exact => target.raw.clone(),
        RangeLevel::Patch => format!("{}.{}.*", target.major, target.minor),
        RangeLevel::Minor => format!("{}.*.*", target.major),
        RangeLevel::Major => "*.*.*".to_string(),
    }
}

/// Aggregate every record updating `provider` to `target` whose origin falls
/// in the `level` bucket of the target. Origins equal to the target are
/// skipped; origins that fail to parse are skipped and counted.
pub fn range_compatibility_score(
    dataset: &ThreeTupleDataset,
    provider: &str,
    ecosystem: &str,
    target: &str,
    level: RangeLevel,
) -> Result<ScoreReport, ScoringError> {
    if level == RangeLevel::Exact {
        return Err(ScoringError::ExactLevelIsNotARange);
    }
    let target_version = parse_version(target)?;
    let (mut candidates, mut successes, mut matched, mut excluded) = (0u64, 0u64, 0usize, 0usize);
    for rec in dataset.records_for_target(provider, ecosystem, target) {
        let Ok(origin) = parse_version(&rec.key.origin) else {
            excluded += 1;
            continue;
        };
        if origin.same_components(&target_version) {
            continue;
        }
        if in_origin_range(&origin, &target_version, level) {
            candidates += rec.candidate_updates;
            successes += rec.successful_updates;
            matched += 1;
        }
    }
    let key = TupleKey::new(provider, ecosystem, range_pattern(&target_version, level), target);
    let mut report = ScoreReport::from_counts(key, level, candidates, successes);
    report.matched_records = matched;
    report.excluded_unparseable = excluded;
    Ok(report)
}
