//! Merge-outcome experiments over feature vectors built from an event log.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::{out_of_sample_bootstrap, BootstrapConfig, ExperimentResult};
use super::forest::ForestConfig;
use super::{derive_seed, LearnError};
use crate::datasets::{LabelPolicy, UpdateEvent};
use crate::features::{feature_matrix, Feature, FeatureConfig, FeatureVector};
use crate::scoring::BADGE_MIN_CANDIDATES;

const SHUFFLE_STREAM: u64 = 0x5_4FF1E;

/// Which focal PRs enter an experiment, by exact-tuple candidate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFilter {
    All,
    AtLeastExactCandidates(u64),
    FewerExactCandidates(u64),
}

impl RowFilter {
    pub fn keeps(self, v: &FeatureVector) -> bool {
        match self {
            RowFilter::All => true,
            RowFilter::AtLeastExactCandidates(n) => v.meta.exact_candidates >= n,
            RowFilter::FewerExactCandidates(n) => v.meta.exact_candidates < n,
        }
    }
}

impl fmt::Display for RowFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowFilter::All => f.write_str("all rows"),
            RowFilter::AtLeastExactCandidates(n) => write!(f, "exact_candidates >= {n}"),
            RowFilter::FewerExactCandidates(n) => write!(f, "exact_candidates < {n}"),
        }
    }
}

/// The four model designs: raw score alone on well-supported updates, and
/// range / history / both on poorly supported ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Baseline,
    Range,
    History,
    Combined,
}

impl Design {
    pub const ALL: [Design; 4] = [Design::Baseline, Design::Range, Design::History, Design::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Design::Baseline => "baseline",
            Design::Range => "range",
            Design::History => "history",
            Design::Combined => "combined",
        }
    }

    pub fn spec(self, seed: u64) -> ExperimentSpec {
        let (features, row_filter) = match self {
            Design::Baseline => (
                vec![Feature::ExactScore],
                RowFilter::AtLeastExactCandidates(BADGE_MIN_CANDIDATES),
            ),
            Design::Range => (
                Feature::RANGE.to_vec(),
                RowFilter::FewerExactCandidates(BADGE_MIN_CANDIDATES),
            ),
            Design::History => (
                Feature::HISTORY.to_vec(),
                RowFilter::FewerExactCandidates(BADGE_MIN_CANDIDATES),
            ),
            Design::Combined => (
                Feature::METRICS.to_vec(),
                RowFilter::FewerExactCandidates(BADGE_MIN_CANDIDATES),
            ),
        };
        ExperimentSpec {
            name: self.name().into(),
            features,
            row_filter,
            seed,
            ..ExperimentSpec::default()
        }
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Design::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown design {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub features: Vec<Feature>,
    pub row_filter: RowFilter,
    pub iterations: usize,
    pub seed: u64,
    /// Fewest rows the filter may leave.
    pub min_rows: usize,
    pub importance_repeats: usize,
    /// `seed` here is ignored in favour of the spec's own seed.
    pub forest: ForestConfig,
    pub label_policy: LabelPolicy,
    /// Permute labels before evaluation (a no-signal control).
    pub shuffle_labels: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "custom".into(),
            features: Vec::new(),
            row_filter: RowFilter::All,
            iterations: 100,
            seed: 0,
            min_rows: 50,
            importance_repeats: 1,
            forest: ForestConfig::default(),
            label_policy: LabelPolicy::Merged,
            shuffle_labels: false,
        }
    }
}

impl ExperimentSpec {
    fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            iterations: self.iterations,
            forest: ForestConfig {
                seed: self.seed,
                ..self.forest.clone()
            },
            importance_repeats: self.importance_repeats,
            ..BootstrapConfig::default()
        }
    }
}

/// Select rows and columns for a spec, shuffling labels if asked.
pub fn design_matrix(
    vectors: &[FeatureVector],
    spec: &ExperimentSpec,
) -> Result<(Vec<Vec<f64>>, Vec<bool>), LearnError> {
    if spec.features.is_empty() {
        return Err(LearnError::EmptyFeatureList);
    }
    let kept: Vec<&FeatureVector> = vectors.iter().filter(|v| spec.row_filter.keeps(v)).collect();
    if kept.is_empty() {
        return Err(LearnError::EmptyFilter(spec.row_filter.to_string()));
    }
    let rows: Vec<Vec<f64>> = kept.iter().map(|v| v.row(&spec.features)).collect();
    let mut labels: Vec<bool> = kept.iter().map(|v| v.label_merged).collect();
    let positives = labels.iter().filter(|&&l| l).count();
    if rows.len() < spec.min_rows || positives == 0 || positives == labels.len() {
        return Err(LearnError::UnderPopulated {
            filter: spec.row_filter.to_string(),
            rows: rows.len(),
            min_rows: spec.min_rows,
        });
    }
    if spec.shuffle_labels {
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, SHUFFLE_STREAM)));
    }
    Ok((rows, labels))
}

/// Run a spec on precomputed vectors (built with the spec's label policy).
pub fn run_experiment_on(
    vectors: &[FeatureVector],
    spec: &ExperimentSpec,
) -> Result<ExperimentResult, LearnError> {
    let (rows, labels) = design_matrix(vectors, spec)?;
    let names: Vec<String> = spec.features.iter().map(|f| f.name().to_string()).collect();
    let mut result = out_of_sample_bootstrap(&rows, &labels, &names, &spec.bootstrap_config())?;
    result.experiment_name = spec.name.clone();
    result.config = serde_json::to_value(spec).expect("spec serializes");
    Ok(result)
}

pub fn run_experiment(
    events: &[UpdateEvent],
    spec: &ExperimentSpec,
) -> Result<ExperimentResult, LearnError> {
    let cfg = FeatureConfig {
        label_policy: spec.label_policy,
        include_non_candidates: false,
    };
    run_experiment_on(&feature_matrix(events, cfg), spec)
}
