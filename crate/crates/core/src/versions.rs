//! Lenient version parsing and origin-version-range membership.
//!
//! Range buckets are defined relative to the *target* version of an update:
//! a patch-range score for target `x.y.z` aggregates every origin matching
//! `x.y.*`, a minor-range score every origin matching `x.*.*`, and a
//! major-range score every origin at all.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable version string {raw:?}: {reason}")]
pub struct VersionError {
    pub raw: String,
    pub reason: &'static str,
}

/// A parsed `major.minor.patch[-prerelease]` version.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub prerelease: Option<String>,
    /// The text the version was parsed from, untouched.
    pub raw: String,
}

impl Version {
    /// Same major, minor, patch and prerelease label. `raw` is ignored, so
    /// `v1.2` and `1.2.0` are the same version.
    pub fn same_components(&self, other: &Version) -> bool {
        self.major == other.major
            && self.minor == other.minor
            && self.patch == other.patch
            && self.prerelease == other.prerelease
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

/// Parse a version string.
///
/// Accepts one optional leading `v`/`V`, one to three dot-separated numeric
/// components (missing minor/patch are zero) and an optional `-prerelease`
/// suffix after a full `major.minor.patch`. Everything else, including
/// four-component and date-like versions, is rejected.
pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    let fail = |reason| VersionError {
        raw: text.to_string(),
        reason,
    };
    if text.is_empty() {
        return Err(fail("empty"));
    }
    let body = text
        .strip_prefix('v')
        .or_else(|| text.strip_prefix('V'))
        .unwrap_or(text);

    let (numeric, prerelease) = match body.split_once('-') {
        Some((_, "")) => return Err(fail("empty prerelease label")),
        Some((n, pre)) => (n, Some(pre.to_string())),
        None => (body, None),
    };

    let mut parts = [0u64; 3];
    let mut count = 0;
    for component in numeric.split('.') {
        if count == 3 {
            return Err(fail("more than three numeric components"));
        }
        if component.is_empty() || !component.bytes().all(|b| b.is_ascii_digit()) {
            return Err(fail("non-numeric component"));
        }
        parts[count] = component.parse().map_err(|_| fail("component overflows"))?;
        count += 1;
    }
    if prerelease.is_some() && count < 3 {
        return Err(fail("prerelease label on a partial version"));
    }

    Ok(Version {
        major: parts[0],
        minor: parts[1],
        patch: parts[2],
        prerelease,
        raw: text.to_string(),
    })
}

/// How wide a set of origin versions is considered for a target.
///
/// Ordered from narrowest to widest; each level matches a superset of the
/// previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeLevel {
    Exact,
    Patch,
    Minor,
    Major,
}

impl RangeLevel {
    pub const ALL: [RangeLevel; 4] = [
        RangeLevel::Exact,
        RangeLevel::Patch,
        RangeLevel::Minor,
        RangeLevel::Major,
    ];
    /// The three aggregated levels.
    pub const RANGES: [RangeLevel; 3] = [RangeLevel::Patch, RangeLevel::Minor, RangeLevel::Major];

    pub fn as_str(self) -> &'static str {
        match self {
            RangeLevel::Exact => "exact",
            RangeLevel::Patch => "patch",
            RangeLevel::Minor => "minor",
            RangeLevel::Major => "major",
        }
    }
}

impl fmt::Display for RangeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RangeLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(RangeLevel::Exact),
            "patch" => Ok(RangeLevel::Patch),
            "minor" => Ok(RangeLevel::Minor),
            "major" => Ok(RangeLevel::Major),
            other => Err(format!("unknown range level {other:?}")),
        }
    }
}

/// Whether `origin` falls into the `level` bucket of `target`.
///
/// Prerelease labels only matter at [`RangeLevel::Exact`].
pub fn in_origin_range(origin: &Version, target: &Version, level: RangeLevel) -> bool {
    match level {
        RangeLevel::Exact => origin.same_components(target),
        RangeLevel::Patch => origin.major == target.major && origin.minor == target.minor,
        RangeLevel::Minor => origin.major == target.major,
        RangeLevel::Major => true,
    }
}
