//! Synthetic ecosystems with known ground truth.
//!
//! Providers publish a release every week. Each client depends on a few
//! providers and gets one bot PR per new release, from whatever version it
//! currently runs. CI fails a breaking update with probability `ci_coverage`
//! and a non-breaking one with probability `flakiness`. The merge decision is
//! logistic in the CI result, the crowd score the client sees, and a fixed
//! per-client trust of +1 or -1.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{
    write_events, write_snapshots, CheckConclusion, CheckRun, ScoreRecord, ThreeTupleDataset,
    Timestamp, UpdateEvent,
};
use crate::features::smoothed;

pub const EVENTS_FILE: &str = "events.ndjson";
pub const SNAPSHOTS_FILE: &str = "snapshots.ndjson";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

const RELEASE_INTERVAL_HOURS: i64 = 168;
/// Opening and closing delays stay under half the release interval, so a PR
/// is always settled before the next release's PR opens.
const MAX_DELAY_MINUTES: i64 = 72 * 60;

const BUILD_CHECKS: [&str; 3] = ["build", "Travis CI", "ubuntu-latest"];
const TEST_CHECKS: [&str; 2] = ["test", "karma"];
const LINT_CHECKS: [&str; 2] = ["eslint", "codecov/patch"];
const USELESS_CHECKS: [&str; 2] = ["WIP", "Label"];
const DEPLOY_CHECKS: [&str; 1] = ["netlify/deploy-preview"];
const SECURITY_CHECKS: [&str; 1] = ["CodeQL"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible ecosystem spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Logistic merge model: `P(merge) = 1 / (1 + exp(-z))` with
/// `z = intercept + ci_passed*c + score_signal*s + client_trust*t`.
/// `ci_passed` is +1 or -1 (0 without CI), `score_signal` is the smoothed
/// crowd score mapped to [-1, 1], `client_trust` is +1 or -1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergePolicy {
    pub intercept: f64,
    pub ci_passed: f64,
    pub score_signal: f64,
    pub client_trust: f64,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy {
            intercept: 0.0,
            ci_passed: 1.0,
            score_signal: 1.0,
            client_trust: 4.0,
        }
    }
}

impl MergePolicy {
    pub fn probability(&self, ci_passed: f64, score_signal: f64, client_trust: f64) -> f64 {
        let z = self.intercept
            + self.ci_passed * ci_passed
            + self.score_signal * score_signal
            + self.client_trust * client_trust;
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcosystemSpec {
    pub ecosystem: String,
    pub provider_count: usize,
    pub releases_per_provider: usize,
    pub client_count: usize,
    /// Providers each client depends on (capped at `provider_count`).
    pub providers_per_client: usize,
    pub breaking_release_prob: f64,
    /// Probability a pipeline catches a breaking update.
    pub ci_coverage: f64,
    /// Probability a non-breaking update fails anyway.
    pub flakiness: f64,
    pub ci_enabled_prob: f64,
    pub base_passing_prob: f64,
    /// Share of clients with trust +1.
    pub trusted_share: f64,
    /// Evenly spaced score snapshots over the timeline.
    pub snapshot_count: usize,
    pub merge_policy: MergePolicy,
    pub seed: u64,
}

impl Default for EcosystemSpec {
    fn default() -> Self {
        EcosystemSpec {
            ecosystem: "npm".into(),
            provider_count: 4,
            releases_per_provider: 10,
            client_count: 100,
            providers_per_client: 2,
            breaking_release_prob: 0.2,
            ci_coverage: 0.8,
            flakiness: 0.05,
            ci_enabled_prob: 0.9,
            base_passing_prob: 0.95,
            trusted_share: 0.5,
            snapshot_count: 4,
            merge_policy: MergePolicy::default(),
            seed: 0,
        }
    }
}

impl EcosystemSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (name, v) in [
            ("provider_count", self.provider_count),
            ("client_count", self.client_count),
            ("providers_per_client", self.providers_per_client),
            ("snapshot_count", self.snapshot_count),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.releases_per_provider < 2 {
            return bad("releases_per_provider must be at least 2 for any update to exist".into());
        }
        for (name, p) in [
            ("breaking_release_prob", self.breaking_release_prob),
            ("ci_coverage", self.ci_coverage),
            ("flakiness", self.flakiness),
            ("ci_enabled_prob", self.ci_enabled_prob),
            ("base_passing_prob", self.base_passing_prob),
            ("trusted_share", self.trusted_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        let m = &self.merge_policy;
        if ![m.intercept, m.ci_passed, m.score_signal, m.client_trust]
            .iter()
            .all(|c| c.is_finite())
        {
            return bad("merge_policy coefficients must be finite".into());
        }
        if self.ecosystem.trim().is_empty() {
            return bad("ecosystem is empty".into());
        }
        Ok(())
    }

    /// Expected CI failure rate of a candidate update to a random release.
    pub fn expected_failure_rate(&self) -> f64 {
        let b = self.breaking_release_prob;
        1.0 - ((1.0 - b) * (1.0 - self.flakiness) + b * (1.0 - self.ci_coverage))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseTruth {
    pub provider: String,
    pub version: String,
    pub released_at: Timestamp,
    pub breaking: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTruth {
    pub client: String,
    pub trust: i8,
    pub ci_enabled: bool,
    pub checks: Vec<String>,
    pub providers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: EcosystemSpec,
    pub expected_failure_rate: f64,
    pub releases: Vec<ReleaseTruth>,
    pub clients: Vec<ClientTruth>,
}

impl GroundTruth {
    pub fn is_breaking(&self, provider: &str, version: &str) -> Option<bool> {
        self.releases
            .iter()
            .find(|r| r.provider == provider && r.version == version)
            .map(|r| r.breaking)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ecosystem {
    /// Sorted by `opened_at`, then client, then provider.
    pub events: Vec<UpdateEvent>,
    /// Every snapshot's records, oldest snapshot first.
    pub snapshots: Vec<ScoreRecord>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenFiles {
    pub events: PathBuf,
    pub snapshots: PathBuf,
    pub ground_truth: PathBuf,
}

impl Ecosystem {
    /// Write the event log, snapshot file and ground truth into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<WrittenFiles, SynthError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = WrittenFiles {
            events: dir.join(EVENTS_FILE),
            snapshots: dir.join(SNAPSHOTS_FILE),
            ground_truth: dir.join(GROUND_TRUTH_FILE),
        };
        let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(io_err(p));

        let mut out = create(&files.events)?;
        write_events(&mut out, &self.events)
            .and_then(|_| out.flush())
            .map_err(io_err(&files.events))?;
        let mut out = create(&files.snapshots)?;
        write_snapshots(&mut out, &self.snapshots)
            .and_then(|_| out.flush())
            .map_err(io_err(&files.snapshots))?;
        let mut out = create(&files.ground_truth)?;
        serde_json::to_writer_pretty(&mut out, &self.truth)
            .map_err(io::Error::from)
            .and_then(|_| writeln!(out))
            .and_then(|_| out.flush())
            .map_err(io_err(&files.ground_truth))?;
        Ok(files)
    }
}

struct Release {
    version: String,
    at: Timestamp,
    breaking: bool,
}

fn release_train(rng: &mut ChaCha8Rng, count: usize, start: Timestamp) -> Vec<(String, Timestamp)> {
    let (mut major, mut minor, mut patch) = (1u64, 0u64, 0u64);
    (0..count)
        .map(|i| {
            if i > 0 {
                let bump: f64 = rng.random();
                if bump < 0.6 {
                    patch += 1;
                } else if bump < 0.9 {
                    minor += 1;
                    patch = 0;
                } else {
                    major += 1;
                    minor = 0;
                    patch = 0;
                }
            }
            (
                format!("{major}.{minor}.{patch}"),
                start + Duration::hours(RELEASE_INTERVAL_HOURS * i as i64),
            )
        })
        .collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, names: &[&'a str]) -> &'a str {
    names[rng.random_range(0..names.len())]
}

fn pipeline(rng: &mut ChaCha8Rng) -> Vec<String> {
    if rng.random_bool(0.1) {
        let mut v = vec![USELESS_CHECKS[0].to_string()];
        if rng.random_bool(0.5) {
            v.push(USELESS_CHECKS[1].to_string());
        }
        return v;
    }
    let mut v = vec![pick(rng, &BUILD_CHECKS).to_string()];
    for (p, pool) in [
        (0.6, &TEST_CHECKS[..]),
        (0.3, &LINT_CHECKS[..]),
        (0.25, &USELESS_CHECKS[..]),
        (0.1, &DEPLOY_CHECKS[..]),
        (0.05, &SECURITY_CHECKS[..]),
    ] {
        if rng.random_bool(p) {
            v.push(pick(rng, pool).to_string());
        }
    }
    v
}

struct Opening {
    at: Timestamp,
    client: usize,
    provider: usize,
    release: usize,
}

/// Generate a full ecosystem. Identical specs give identical output.
pub fn generate_ecosystem(spec: &EcosystemSpec) -> Result<Ecosystem, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap();

    let provider_names: Vec<String> = (0..spec.provider_count)
        .map(|i| format!("provider-{i:02}"))
        .collect();
    let releases: Vec<Vec<Release>> = (0..spec.provider_count)
        .map(|_| {
            let offset = Duration::minutes(rng.random_range(0..24 * 60));
            release_train(&mut rng, spec.releases_per_provider, start + offset)
                .into_iter()
                .enumerate()
                .map(|(i, (version, at))| Release {
                    version,
                    at,
                    // The initial release is never an update target.
                    breaking: i > 0 && rng.random_bool(spec.breaking_release_prob),
                })
                .collect()
        })
        .collect();

    let per_client = spec.providers_per_client.min(spec.provider_count);
    let clients: Vec<ClientTruth> = (0..spec.client_count)
        .map(|i| {
            let trust = if rng.random_bool(spec.trusted_share) { 1 } else { -1 };
            let ci_enabled = rng.random_bool(spec.ci_enabled_prob);
            let checks = if ci_enabled { pipeline(&mut rng) } else { Vec::new() };
            let mut deps = sample(&mut rng, spec.provider_count, per_client).into_vec();
            deps.sort_unstable();
            ClientTruth {
                client: format!("client-{i:04}"),
                trust,
                ci_enabled,
                checks,
                providers: deps.iter().map(|&p| provider_names[p].clone()).collect(),
            }
        })
        .collect();
    let client_deps: Vec<Vec<usize>> = clients
        .iter()
        .map(|c| {
            c.providers
                .iter()
                .map(|p| provider_names.iter().position(|n| n == p).unwrap())
                .collect()
        })
        .collect();

    let mut openings = Vec::new();
    for (c, deps) in client_deps.iter().enumerate() {
        for &p in deps {
            for (r, rel) in releases[p].iter().enumerate().skip(1) {
                let delay = Duration::minutes(rng.random_range(0..MAX_DELAY_MINUTES));
                openings.push(Opening {
                    at: rel.at + delay,
                    client: c,
                    provider: p,
                    release: r,
                });
            }
        }
    }
    openings.sort_by_key(|o| (o.at, o.client, o.provider));

    // Version index each client currently runs, per provider.
    let mut current: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    // Crowd counts (S, N) visible so far, per (provider, origin, target).
    let mut crowd: BTreeMap<(usize, usize, usize), (u64, u64)> = BTreeMap::new();
    let mut events = Vec::with_capacity(openings.len());
    for o in &openings {
        let client = &clients[o.client];
        let origin = *current.entry((o.client, o.provider)).or_insert(0);
        let target = &releases[o.provider][o.release];
        let base_ci_passing = rng.random_bool(spec.base_passing_prob);

        let failed = client.ci_enabled && {
            let p = if target.breaking { spec.ci_coverage } else { spec.flakiness };
            rng.random_bool(p)
        };
        let checks: Vec<CheckRun> = client
            .checks
            .iter()
            .enumerate()
            .map(|(i, name)| CheckRun {
                name: name.clone(),
                conclusion: if failed && i == 0 {
                    CheckConclusion::Failure
                } else {
                    CheckConclusion::Success
                },
            })
            .collect();

        let key = (o.provider, origin, o.release);
        let (s, n) = crowd.get(&key).copied().unwrap_or((0, 0));
        let score_signal = 2.0 * smoothed(s, n) - 1.0;
        let ci_signal = match (client.ci_enabled, failed) {
            (false, _) => 0.0,
            (true, true) => -1.0,
            (true, false) => 1.0,
        };
        let p_merge = spec
            .merge_policy
            .probability(ci_signal, score_signal, f64::from(client.trust));
        let merged = rng.random_bool(p_merge);
        let settle = Duration::minutes(rng.random_range(1..MAX_DELAY_MINUTES));
        let closed_at = if merged || rng.random_bool(0.8) {
            Some(o.at + settle)
        } else {
            None
        };

        if client.ci_enabled && base_ci_passing {
            let entry = crowd.entry(key).or_insert((0, 0));
            entry.1 += 1;
            if !failed {
                entry.0 += 1;
            }
        }
        if merged {
            current.insert((o.client, o.provider), o.release);
        }

        events.push(UpdateEvent {
            client: client.client.clone(),
            ecosystem: spec.ecosystem.clone(),
            provider: provider_names[o.provider].clone(),
            origin: releases[o.provider][origin].version.clone(),
            target: target.version.clone(),
            opened_at: o.at,
            closed_at,
            merged,
            merged_by_human: merged.then_some(true),
            base_ci_passing,
            checks,
        });
    }

    let snapshots = snapshot_records(&events, spec.snapshot_count);
    let truth = GroundTruth {
        spec: spec.clone(),
        expected_failure_rate: spec.expected_failure_rate(),
        releases: releases
            .iter()
            .zip(&provider_names)
            .flat_map(|(rels, p)| {
                rels.iter().map(move |r| ReleaseTruth {
                    provider: p.clone(),
                    version: r.version.clone(),
                    released_at: r.at,
                    breaking: r.breaking,
                })
            })
            .collect(),
        clients,
    };
    Ok(Ecosystem {
        events,
        snapshots,
        truth,
    })
}

/// Crowd records at `count` evenly spaced fetch times; the last one covers
/// every event.
fn snapshot_records(events: &[UpdateEvent], count: usize) -> Vec<ScoreRecord> {
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Vec::new();
    };
    let t0 = first.opened_at;
    let span = last.opened_at - t0 + Duration::hours(1);
    let mut out = Vec::new();
    for k in 1..=count {
        let fetched = t0 + span * k as i32 / count as i32;
        let seen = events.iter().take_while(|e| e.opened_at < fetched);
        for rec in ThreeTupleDataset::from_events(seen).records() {
            out.push(ScoreRecord {
                fetched_at: Some(fetched),
                ..rec.clone()
            });
        }
    }
    out
}
