//! Core records, file ingestion, and the 3-tuple / 4-tuple datasets.
//!
//! An [`UpdateEvent`] is one bot-opened update PR in one client (a 4-tuple
//! observation). A [`ScoreRecord`] carries the crowd counts for a
//! `(provider, origin, target)` update across all clients (a 3-tuple).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed snapshot file: {0}")]
    Malformed(String),
}

impl DatasetError {
    fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckConclusion {
    Success,
    Failure,
    Neutral,
    Skipped,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRun {
    pub name: String,
    pub conclusion: CheckConclusion,
}

/// One dependency-update PR opened by the bot in a client package.
///
/// Serializes to exactly one line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateEvent {
    pub client: String,
    pub ecosystem: String,
    pub provider: String,
    #[serde(rename = "origin_version")]
    pub origin: String,
    #[serde(rename = "target_version")]
    pub target: String,
    pub opened_at: Timestamp,
    pub closed_at: Option<Timestamp>,
    pub merged: bool,
    pub merged_by_human: Option<bool>,
    /// Main-branch suite was passing when the PR was opened.
    pub base_ci_passing: bool,
    pub checks: Vec<CheckRun>,
}

impl UpdateEvent {
    pub fn key(&self) -> TupleKey {
        TupleKey {
            provider: self.provider.clone(),
            ecosystem: self.ecosystem.clone(),
            origin: self.origin.clone(),
            target: self.target.clone(),
        }
    }

    /// Checks the record-level invariants; the error string is the rejection reason.
    pub fn validate(&self) -> Result<(), String> {
        for (field, value) in [
            ("client", &self.client),
            ("ecosystem", &self.ecosystem),
            ("provider", &self.provider),
            ("origin_version", &self.origin),
            ("target_version", &self.target),
        ] {
            if value.trim().is_empty() {
                return Err(format!("{field} is empty"));
            }
        }
        if let Some(closed) = self.closed_at {
            if closed < self.opened_at {
                return Err("closed_at precedes opened_at".into());
            }
        }
        if self.merged && self.closed_at.is_none() {
            return Err("merged is true but closed_at is absent".into());
        }
        if self.merged_by_human == Some(true) && !self.merged {
            return Err("merged_by_human is true but merged is false".into());
        }
        if let Some(i) = self.checks.iter().position(|c| c.name.trim().is_empty()) {
            return Err(format!("check #{i} has an empty name"));
        }
        Ok(())
    }
}

/// Overall CI result of an update PR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiConclusion {
    Success,
    Failure,
    NoCi,
}

/// Cancelled runs fail a pipeline, neutral and skipped runs do not.
pub fn ci_conclusion(event: &UpdateEvent) -> CiConclusion {
    if event.checks.is_empty() {
        return CiConclusion::NoCi;
    }
    let failed = event.checks.iter().any(|c| {
        matches!(
            c.conclusion,
            CheckConclusion::Failure | CheckConclusion::Cancelled
        )
    });
    if failed {
        CiConclusion::Failure
    } else {
        CiConclusion::Success
    }
}

/// A PR counts toward the crowd score only when the client runs CI and its
/// main branch was passing beforehand.
pub fn is_candidate_update(event: &UpdateEvent) -> bool {
    event.base_ci_passing && ci_conclusion(event) != CiConclusion::NoCi
}

/// Which events count as "merged" for labels and merge history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    #[default]
    Merged,
    /// Only merges explicitly attributed to a human.
    MergedByHuman,
}

impl LabelPolicy {
    pub fn is_merged(self, event: &UpdateEvent) -> bool {
        match self {
            LabelPolicy::Merged => event.merged,
            LabelPolicy::MergedByHuman => event.merged && event.merged_by_human == Some(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TupleKey {
    pub provider: String,
    pub ecosystem: String,
    pub origin: String,
    pub target: String,
}

impl TupleKey {
    pub fn new(
        provider: impl Into<String>,
        ecosystem: impl Into<String>,
        origin: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        TupleKey {
            provider: provider.into(),
            ecosystem: ecosystem.into(),
            origin: origin.into(),
            target: target.into(),
        }
    }
}

impl std::fmt::Display for TupleKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{} {} -> {}",
            self.ecosystem, self.provider, self.origin, self.target
        )
    }
}

/// Crowd counts for one 3-tuple update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRecord {
    pub key: TupleKey,
    pub candidate_updates: u64,
    pub successful_updates: u64,
    pub fetched_at: Option<Timestamp>,
}

/// Wire shape of one snapshot record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRecord {
    pub dependency_name: String,
    pub package_manager: String,
    pub previous_version: String,
    pub updated_version: String,
    pub candidate_updates: u64,
    pub successful_updates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<Timestamp>,
}

impl TryFrom<SnapshotRecord> for ScoreRecord {
    type Error = String;

    fn try_from(r: SnapshotRecord) -> Result<Self, String> {
        for (field, value) in [
            ("dependency_name", &r.dependency_name),
            ("package_manager", &r.package_manager),
            ("previous_version", &r.previous_version),
            ("updated_version", &r.updated_version),
        ] {
            if value.trim().is_empty() {
                return Err(format!("{field} is empty"));
            }
        }
        if r.candidate_updates == 0 {
            return Err("candidate_updates is 0".into());
        }
        if r.successful_updates > r.candidate_updates {
            return Err(format!(
                "successful_updates ({}) exceeds candidate_updates ({})",
                r.successful_updates, r.candidate_updates
            ));
        }
        Ok(ScoreRecord {
            key: TupleKey::new(
                r.dependency_name,
                r.package_manager,
                r.previous_version,
                r.updated_version,
            ),
            candidate_updates: r.candidate_updates,
            successful_updates: r.successful_updates,
            fetched_at: r.fetched_at,
        })
    }
}

impl From<&ScoreRecord> for SnapshotRecord {
    fn from(r: &ScoreRecord) -> Self {
        SnapshotRecord {
            dependency_name: r.key.provider.clone(),
            package_manager: r.key.ecosystem.clone(),
            previous_version: r.key.origin.clone(),
            updated_version: r.key.target.clone(),
            candidate_updates: r.candidate_updates,
            successful_updates: r.successful_updates,
            fetched_at: r.fetched_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number (or array position for JSON-array snapshot files).
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Non-blank records seen.
    pub total: usize,
    pub loaded: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.rejected.push(Rejection {
            line,
            reason: reason.into(),
        });
    }
}

impl std::fmt::Display for IngestReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "loaded {}/{} records, {} rejected",
            self.loaded,
            self.total,
            self.rejected.len()
        )?;
        for r in &self.rejected {
            writeln!(f, "  line {}: {}", r.line, r.reason)?;
        }
        Ok(())
    }
}

/// Load a newline-delimited event log. Blank lines are skipped and not counted.
pub fn ingest_events<R: BufRead>(
    source: R,
) -> Result<(Vec<UpdateEvent>, IngestReport), DatasetError> {
    let mut events = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io("<event stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        let lineno = idx + 1;
        match serde_json::from_str::<UpdateEvent>(&line) {
            Err(e) => report.reject(lineno, e.to_string()),
            Ok(ev) => match ev.validate() {
                Err(reason) => report.reject(lineno, reason),
                Ok(()) => events.push(ev),
            },
        }
    }
    report.loaded = events.len();
    Ok((events, report))
}

pub fn read_events_file(
    path: impl AsRef<Path>,
) -> Result<(Vec<UpdateEvent>, IngestReport), DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path.display().to_string(), e))?;
    ingest_events(BufReader::new(file)).map_err(|err| match err {
        DatasetError::Io { source, .. } => DatasetError::io(path.display().to_string(), source),
        other => other,
    })
}

pub fn write_events<W: Write>(mut out: W, events: &[UpdateEvent]) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Load snapshot records from either a JSON array or newline-delimited objects.
pub fn ingest_snapshots<R: Read>(
    mut source: R,
) -> Result<(Vec<ScoreRecord>, IngestReport), DatasetError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| DatasetError::io("<snapshot stream>", e))?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut accept = |pos: usize, value: Result<SnapshotRecord, String>| {
        report.total += 1;
        match value.and_then(ScoreRecord::try_from) {
            Ok(r) => records.push(r),
            Err(reason) => report.reject(pos, reason),
        }
    };

    if text.trim_start().starts_with('[') {
        let items: Vec<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| DatasetError::Malformed(e.to_string()))?;
        for (i, item) in items.into_iter().enumerate() {
            accept(
                i + 1,
                serde_json::from_value(item).map_err(|e| e.to_string()),
            );
        }
    } else {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            accept(i + 1, serde_json::from_str(line).map_err(|e| e.to_string()));
        }
    }
    report.loaded = records.len();
    Ok((records, report))
}

pub fn read_snapshots_file(
    path: impl AsRef<Path>,
) -> Result<(Vec<ScoreRecord>, IngestReport), DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path.display().to_string(), e))?;
    ingest_snapshots(file).map_err(|err| match err {
        DatasetError::Io { source, .. } => DatasetError::io(path.display().to_string(), source),
        other => other,
    })
}

pub fn write_snapshots<W: Write>(mut out: W, records: &[ScoreRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &SnapshotRecord::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Two snapshot records for the same key; `kept` won.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub key: TupleKey,
    pub kept: Option<Timestamp>,
    pub dropped: Option<Timestamp>,
}

/// The 3-tuple dataset: one [`ScoreRecord`] per update key, every record with N >= 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThreeTupleDataset {
    records: BTreeMap<TupleKey, ScoreRecord>,
}

impl ThreeTupleDataset {
    /// Count candidate and successful updates per key. Keys with no
    /// candidate update are absent.
    pub fn from_events<'a, I>(events: I) -> Self
    where
        I: IntoIterator<Item = &'a UpdateEvent>,
    {
        let mut records: BTreeMap<TupleKey, ScoreRecord> = BTreeMap::new();
        for ev in events {
            if !is_candidate_update(ev) {
                continue;
            }
            let rec = records.entry(ev.key()).or_insert_with_key(|k| ScoreRecord {
                key: k.clone(),
                candidate_updates: 0,
                successful_updates: 0,
                fetched_at: None,
            });
            rec.candidate_updates += 1;
            if ci_conclusion(ev) == CiConclusion::Success {
                rec.successful_updates += 1;
            }
        }
        ThreeTupleDataset { records }
    }

    /// Take snapshot records verbatim. For duplicate keys the record with the
    /// latest `fetched_at` wins (a missing time is older than any time; on a
    /// tie the later record in input order wins).
    pub fn from_snapshots(snapshots: impl IntoIterator<Item = ScoreRecord>) -> (Self, Vec<Collision>) {
        let mut records: BTreeMap<TupleKey, ScoreRecord> = BTreeMap::new();
        let mut collisions = Vec::new();
        for rec in snapshots {
            match records.get_mut(&rec.key) {
                None => {
                    records.insert(rec.key.clone(), rec);
                }
                Some(existing) => {
                    let (kept, dropped) = if rec.fetched_at >= existing.fetched_at {
                        let dropped = existing.fetched_at;
                        let kept = rec.fetched_at;
                        *existing = rec;
                        (kept, dropped)
                    } else {
                        (existing.fetched_at, rec.fetched_at)
                    };
                    collisions.push(Collision {
                        key: existing.key.clone(),
                        kept,
                        dropped,
                    });
                }
            }
        }
        (ThreeTupleDataset { records }, collisions)
    }

    pub fn get(&self, key: &TupleKey) -> Option<&ScoreRecord> {
        self.records.get(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ScoreRecord> {
        self.records.values()
    }

    /// Every record updating `provider` in `ecosystem` to `target`, any origin.
    pub fn records_for_target<'a>(
        &'a self,
        provider: &'a str,
        ecosystem: &'a str,
        target: &'a str,
    ) -> impl Iterator<Item = &'a ScoreRecord> + 'a {
        self.records
            .values()
            .filter(move |r| {
                r.key.provider == provider && r.key.ecosystem == ecosystem && r.key.target == target
            })
    }
}

impl FromIterator<ScoreRecord> for ThreeTupleDataset {
    fn from_iter<T: IntoIterator<Item = ScoreRecord>>(iter: T) -> Self {
        ThreeTupleDataset::from_snapshots(iter).0
    }
}

/// An event paired with the crowd record of its 3-tuple, if one exists.
#[derive(Debug, Clone, Copy)]
pub struct LinkedEvent<'a> {
    pub event: &'a UpdateEvent,
    pub record: Option<&'a ScoreRecord>,
}

/// Build the 4-tuple dataset. Records are shared, never modified.
pub fn link_four_tuple<'a>(
    events: &'a [UpdateEvent],
    dataset: &'a ThreeTupleDataset,
) -> Vec<LinkedEvent<'a>> {
    events
        .iter()
        .map(|event| LinkedEvent {
            event,
            record: dataset.get(&event.key()),
        })
        .collect()
}

/// Per-key `(fetched_at, candidates, successes)` points.
pub type CountSeries = BTreeMap<TupleKey, Vec<(Timestamp, u64, u64)>>;

/// Group timestamped snapshot records into per-key score series, oldest first.
/// Records without `fetched_at` cannot be placed and are counted instead.
pub fn snapshot_series(
    records: &[ScoreRecord],
) -> (CountSeries, usize) {
    let mut series = CountSeries::new();
    let mut untimed = 0;
    for r in records {
        match r.fetched_at {
            Some(t) => series.entry(r.key.clone()).or_default().push((
                t,
                r.successful_updates,
                r.candidate_updates,
            )),
            None => untimed += 1,
        }
    }
    for points in series.values_mut() {
        points.sort_by_key(|p| p.0);
    }
    (series, untimed)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use chrono::TimeZone;

    pub fn ts(hour: i64) -> Timestamp {
        Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::hours(hour)
    }

    pub fn check(name: &str, conclusion: CheckConclusion) -> CheckRun {
        CheckRun {
            name: name.into(),
            conclusion,
        }
    }

    /// A passing-base event with one check of the given conclusion.
    pub fn event(
        client: &str,
        provider: &str,
        origin: &str,
        target: &str,
        hour: i64,
        ok: bool,
        merged: bool,
    ) -> UpdateEvent {
        UpdateEvent {
            client: client.into(),
            ecosystem: "npm".into(),
            provider: provider.into(),
            origin: origin.into(),
            target: target.into(),
            opened_at: ts(hour),
            closed_at: Some(ts(hour + 1)),
            merged,
            merged_by_human: Some(merged),
            base_ci_passing: true,
            checks: vec![check(
                "build",
                if ok {
                    CheckConclusion::Success
                } else {
                    CheckConclusion::Failure
                },
            )],
        }
    }
}
