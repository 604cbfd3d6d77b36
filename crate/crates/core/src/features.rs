//! Per-PR model features: three origin-version-range scores, four
//! client-history counts and the merge label.
//!
//! Everything is computed from events opened strictly before the focal PR,
//! so a feature vector never sees its own outcome or anything later.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{
    ci_conclusion, is_candidate_update, CiConclusion, LabelPolicy, ThreeTupleDataset, Timestamp,
    TupleKey, UpdateEvent,
};
use crate::scoring::range_compatibility_score;
use crate::versions::RangeLevel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("focal event is not part of the event list")]
    FocalNotFound,
    #[error("focal event is not a candidate update")]
    NotCandidate,
}

/// A model input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Smoothed exact-tuple score; the baseline model's only input.
    ExactScore,
    PatchRangeScore,
    MinorRangeScore,
    MajorRangeScore,
    PassingDbPrs,
    PassingProviderDbPrs,
    MergedDbPrs,
    MergedProviderDbPrs,
}

impl Feature {
    pub const RANGE: [Feature; 3] = [
        Feature::PatchRangeScore,
        Feature::MinorRangeScore,
        Feature::MajorRangeScore,
    ];
    pub const HISTORY: [Feature; 4] = [
        Feature::PassingDbPrs,
        Feature::PassingProviderDbPrs,
        Feature::MergedDbPrs,
        Feature::MergedProviderDbPrs,
    ];
    /// The seven range and history metrics.
    pub const METRICS: [Feature; 7] = [
        Feature::PatchRangeScore,
        Feature::MinorRangeScore,
        Feature::MajorRangeScore,
        Feature::PassingDbPrs,
        Feature::PassingProviderDbPrs,
        Feature::MergedDbPrs,
        Feature::MergedProviderDbPrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::ExactScore => "exact_score",
            Feature::PatchRangeScore => "patch_range_score",
            Feature::MinorRangeScore => "minor_range_score",
            Feature::MajorRangeScore => "major_range_score",
            Feature::PassingDbPrs => "passing_db_prs",
            Feature::PassingProviderDbPrs => "passing_provider_db_prs",
            Feature::MergedDbPrs => "merged_db_prs",
            Feature::MergedProviderDbPrs => "merged_provider_db_prs",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(Feature::ExactScore)
            .chain(Feature::METRICS)
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

/// `(S + 1) / (N + 2)`, the posterior mean under a uniform prior.
pub fn smoothed(successes: u64, candidates: u64) -> f64 {
    (successes as f64 + 1.0) / (candidates as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HistoryCounts {
    pub passing: u64,
    pub passing_provider: u64,
    pub merged: u64,
    pub merged_provider: u64,
}

/// Columns carried alongside the features for filtering and export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMeta {
    pub client: String,
    pub key: TupleKey,
    pub opened_at: Timestamp,
    /// Raw candidate counts at each level: exact, patch, minor, major.
    pub exact_candidates: u64,
    pub patch_candidates: u64,
    pub minor_candidates: u64,
    pub major_candidates: u64,
    /// The target did not parse; range features hold the exact score.
    pub range_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub exact_score: f64,
    pub patch_range_score: f64,
    pub minor_range_score: f64,
    pub major_range_score: f64,
    pub passing_db_prs: u64,
    pub passing_provider_db_prs: u64,
    pub merged_db_prs: u64,
    pub merged_provider_db_prs: u64,
    pub label_merged: bool,
    pub meta: FeatureMeta,
}

impl FeatureVector {
    pub fn value(&self, feature: Feature) -> f64 {
        match feature {
            Feature::ExactScore => self.exact_score,
            Feature::PatchRangeScore => self.patch_range_score,
            Feature::MinorRangeScore => self.minor_range_score,
            Feature::MajorRangeScore => self.major_range_score,
            Feature::PassingDbPrs => self.passing_db_prs as f64,
            Feature::PassingProviderDbPrs => self.passing_provider_db_prs as f64,
            Feature::MergedDbPrs => self.merged_db_prs as f64,
            Feature::MergedProviderDbPrs => self.merged_provider_db_prs as f64,
        }
    }

    pub fn row(&self, features: &[Feature]) -> Vec<f64> {
        features.iter().map(|&f| self.value(f)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub label_policy: LabelPolicy,
    /// Also emit vectors for PRs that are not candidate updates.
    pub include_non_candidates: bool,
}

/// Count the client's PRs opened strictly before the focal one.
pub fn client_history_metrics(
    events: &[UpdateEvent],
    focal: &UpdateEvent,
    policy: LabelPolicy,
) -> Result<HistoryCounts, FeatureError> {
    if !events.iter().any(|e| e == focal) {
        return Err(FeatureError::FocalNotFound);
    }
    Ok(history_over(
        events.iter().filter(|e| e.client == focal.client),
        focal,
        policy,
    ))
}

fn history_over<'a>(
    client_events: impl Iterator<Item = &'a UpdateEvent>,
    focal: &UpdateEvent,
    policy: LabelPolicy,
) -> HistoryCounts {
    let mut h = HistoryCounts::default();
    for e in client_events.filter(|e| e.opened_at < focal.opened_at) {
        let same_provider = e.provider == focal.provider && e.ecosystem == focal.ecosystem;
        if ci_conclusion(e) == CiConclusion::Success {
            h.passing += 1;
            h.passing_provider += same_provider as u64;
        }
        if policy.is_merged(e) {
            h.merged += 1;
            h.merged_provider += same_provider as u64;
        }
    }
    h
}

type TargetKey = (String, String, String);

/// Indexes an event log once so vectors for many focal PRs are cheap.
pub struct FeatureExtractor<'a> {
    events: &'a [UpdateEvent],
    cfg: FeatureConfig,
    by_client: HashMap<&'a str, Vec<usize>>,
    candidates_by_target: HashMap<TargetKey, Vec<usize>>,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(events: &'a [UpdateEvent], cfg: FeatureConfig) -> Self {
        let mut by_client: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut candidates_by_target: HashMap<TargetKey, Vec<usize>> = HashMap::new();
        for (i, e) in events.iter().enumerate() {
            by_client.entry(&e.client).or_default().push(i);
            if is_candidate_update(e) {
                candidates_by_target
                    .entry((e.provider.clone(), e.ecosystem.clone(), e.target.clone()))
                    .or_default()
                    .push(i);
            }
        }
        FeatureExtractor {
            events,
            cfg,
            by_client,
            candidates_by_target,
        }
    }

    /// The 3-tuple dataset for the focal target as it stood just before the
    /// focal PR opened.
    fn prior_dataset(&self, focal: &UpdateEvent) -> ThreeTupleDataset {
        let key = (
            focal.provider.clone(),
            focal.ecosystem.clone(),
            focal.target.clone(),
        );
        let prior = self
            .candidates_by_target
            .get(&key)
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i])
            .filter(|e| e.opened_at < focal.opened_at);
        ThreeTupleDataset::from_events(prior)
    }

    pub fn extract(&self, focal: &UpdateEvent) -> Result<FeatureVector, FeatureError> {
        if !self.cfg.include_non_candidates && !is_candidate_update(focal) {
            return Err(FeatureError::NotCandidate);
        }
        let client_events = self
            .by_client
            .get(focal.client.as_str())
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i]);
        let history = history_over(client_events, focal, self.cfg.label_policy);

        let dataset = self.prior_dataset(focal);
        let (exact_s, exact_n) = dataset
            .get(&focal.key())
            .map(|r| (r.successful_updates, r.candidate_updates))
            .unwrap_or((0, 0));
        let exact_score = smoothed(exact_s, exact_n);

        let mut range = [(exact_score, 0u64); 3];
        let mut range_fallback = false;
        for (slot, level) in range.iter_mut().zip(RangeLevel::RANGES) {
            match range_compatibility_score(
                &dataset,
                &focal.provider,
                &focal.ecosystem,
                &focal.target,
                level,
            ) {
                Ok(r) => {
                    *slot = (
                        smoothed(r.successful_updates, r.candidate_updates),
                        r.candidate_updates,
                    )
                }
                Err(_) => {
                    range_fallback = true;
                    *slot = (exact_score, exact_n);
                }
            }
        }

        Ok(FeatureVector {
            exact_score,
            patch_range_score: range[0].0,
            minor_range_score: range[1].0,
            major_range_score: range[2].0,
            passing_db_prs: history.passing,
            passing_provider_db_prs: history.passing_provider,
            merged_db_prs: history.merged,
            merged_provider_db_prs: history.merged_provider,
            label_merged: self.cfg.label_policy.is_merged(focal),
            meta: FeatureMeta {
                client: focal.client.clone(),
                key: focal.key(),
                opened_at: focal.opened_at,
                exact_candidates: exact_n,
                patch_candidates: range[0].1,
                minor_candidates: range[1].1,
                major_candidates: range[2].1,
                range_fallback,
            },
        })
    }

    /// Vectors for every eligible PR, in event-log order.
    pub fn matrix(&self) -> Vec<FeatureVector> {
        self.events
            .par_iter()
            .filter_map(|e| self.extract(e).ok())
            .collect()
    }
}

pub fn feature_vector(
    events: &[UpdateEvent],
    focal: &UpdateEvent,
    cfg: FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    if !events.iter().any(|e| e == focal) {
        return Err(FeatureError::FocalNotFound);
    }
    FeatureExtractor::new(events, cfg).extract(focal)
}

pub fn feature_matrix(events: &[UpdateEvent], cfg: FeatureConfig) -> Vec<FeatureVector> {
    FeatureExtractor::new(events, cfg).matrix()
}

pub const CSV_HEADER: [&str; 20] = [
    "client",
    "provider",
    "ecosystem",
    "origin_version",
    "target_version",
    "opened_at",
    "exact_candidates",
    "patch_candidates",
    "minor_candidates",
    "major_candidates",
    "range_fallback",
    "exact_score",
    "patch_range_score",
    "minor_range_score",
    "major_range_score",
    "passing_db_prs",
    "passing_provider_db_prs",
    "merged_db_prs",
    "merged_provider_db_prs",
    "label_merged",
];

pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureVector]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.meta;
        w.write_record([
            m.client.clone(),
            m.key.provider.clone(),
            m.key.ecosystem.clone(),
            m.key.origin.clone(),
            m.key.target.clone(),
            m.opened_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            m.exact_candidates.to_string(),
            m.patch_candidates.to_string(),
            m.minor_candidates.to_string(),
            m.major_candidates.to_string(),
            m.range_fallback.to_string(),
            r.exact_score.to_string(),
            r.patch_range_score.to_string(),
            r.minor_range_score.to_string(),
            r.major_range_score.to_string(),
            r.passing_db_prs.to_string(),
            r.passing_provider_db_prs.to_string(),
            r.merged_db_prs.to_string(),
            r.merged_provider_db_prs.to_string(),
            r.label_merged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
