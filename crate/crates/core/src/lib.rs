//! Crowd-based compatibility scoring for dependency updates.
//!
//! A dependency-update bot opens a PR in a client package to move a provider
//! from an origin version to a target version. Across all clients, the share
//! of such PRs whose CI passes is the update's compatibility score. This crate
//! ingests event logs and score snapshots, computes raw and version-range
//! scores with beta-posterior intervals, classifies CI checks, builds
//! time-aware features, and evaluates merge-outcome models.

pub mod analytics;
pub mod checks;
pub mod cli;
pub mod confidence;
pub mod datasets;
pub mod features;
pub mod learn;
pub mod scoring;
pub mod synth;
pub mod versions;

pub use checks::{classify_check_name, CheckCategory};
pub use confidence::{ci_precision, confidence_interval, posterior_params, score_sigma, Interval};
pub use datasets::{ScoreRecord, ThreeTupleDataset, TupleKey, UpdateEvent};
pub use scoring::{compatibility_score, range_compatibility_score, Badge, Score, ScoreReport};
pub use versions::{in_origin_range, parse_version, RangeLevel, Version};
