//! Check-name classification and pipeline-quality flags.
//!
//! Each category is a single case-insensitive regular expression. When a
//! name matches several categories the first one in [`PRECEDENCE`] wins.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::datasets::UpdateEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CheckCategory {
    Build,
    Test,
    Useless,
    Lint,
    Deploy,
    SecurityAnalysis,
    Unclassified,
}

impl CheckCategory {
    /// Display order, most common category first.
    pub const ALL: [CheckCategory; 7] = [
        CheckCategory::Build,
        CheckCategory::Test,
        CheckCategory::Useless,
        CheckCategory::Lint,
        CheckCategory::Deploy,
        CheckCategory::SecurityAnalysis,
        CheckCategory::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckCategory::Build => "Build",
            CheckCategory::Test => "Test",
            CheckCategory::Useless => "Useless",
            CheckCategory::Lint => "Lint",
            CheckCategory::Deploy => "Deploy",
            CheckCategory::SecurityAnalysis => "Security Analysis",
            CheckCategory::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for CheckCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Order in which overlapping patterns are tried.
pub const PRECEDENCE: [CheckCategory; 6] = [
    CheckCategory::Useless,
    CheckCategory::SecurityAnalysis,
    CheckCategory::Deploy,
    CheckCategory::Lint,
    CheckCategory::Test,
    CheckCategory::Build,
];

pub const BUILD_PATTERN: &str = r"(^| |-)(build|install)|Travis CI|developing-with-angular|(main|workflow|setup)|Node(.js)? \d?\d?|(Continuous integration|^ci($| ))|(tsc|typescript)|monica CI|(web|webpack)|PHP|(Try: )?ember((-| )try)?|(macOS|windows|ubuntu|linux)(-latest)?|Python|^3.\d$|^2.\d$";

pub const TEST_PATTERN: &str =
    r"(^| )test|Analy(s|z)e|Analysis|karma|e2e| stoplightio|check| unit-js| run|Validation|rspec";

pub const USELESS_PATTERN: &str = r"WIP|^Rule: automatic merge for Dependabot pull requests \(merge\)$|(Auto ?)?merge|^stale$|^Update \.NET SDK$|^Summary$|fixupbot|Mixed content|Rebase|Autosquash|Backport|docs|hyperjump|kodiakhq: status|DCO|lock|Discord Listener|Label|css|Clean GitHub pages|pre-commit|remove-pr|markdown-link-check|Run CircleCI artifacts redirector|pedrolamas.com|Auto Approve a PR by dependabot|dependabolt|github/dependabot.yml|greeting|chrome|firefox|finish|mui-org.material-ui| jbhannah.net|Always run job|jhipster.generator-jhipster|dispatch|Timeline protection|Inclusive Language|mark-duplicate|migration|Generate HTML log|feature flags";

pub const LINT_PATTERN: &str = r"(es)?lint|ESLint Report Analysis|codecov|Floating Dependencies|prettier| Coverage|Standard| bundle-size|pronto|flake8| mypy|CodeFactor|Code style";

pub const DEPLOY_PATTERN: &str =
    r"Redirect rules|Header rules|deploy|release|Pages changed|publish|artifact";

pub const SECURITY_PATTERN: &str = r"code(| |-)ql|GitGuardian Security Checks|SonarCloud Code Analysis|LGTM analysis|depcheck|audit| rubocop";

pub fn pattern_for(category: CheckCategory) -> Option<&'static str> {
    match category {
        CheckCategory::Build => Some(BUILD_PATTERN),
        CheckCategory::Test => Some(TEST_PATTERN),
        CheckCategory::Useless => Some(USELESS_PATTERN),
        CheckCategory::Lint => Some(LINT_PATTERN),
        CheckCategory::Deploy => Some(DEPLOY_PATTERN),
        CheckCategory::SecurityAnalysis => Some(SECURITY_PATTERN),
        CheckCategory::Unclassified => None,
    }
}

static CLASSIFIER: LazyLock<Vec<(CheckCategory, Regex)>> = LazyLock::new(|| {
    PRECEDENCE
        .iter()
        .map(|&cat| {
            let pat = pattern_for(cat).expect("classified category has a pattern");
            (cat, Regex::new(&format!("(?i){pat}")).expect("check pattern compiles"))
        })
        .collect()
});

pub fn classify_check_name(name: &str) -> CheckCategory {
    CLASSIFIER
        .iter()
        .find(|(_, re)| re.is_match(name))
        .map(|(cat, _)| *cat)
        .unwrap_or(CheckCategory::Unclassified)
}

/// What kinds of checks gated one update PR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineQuality {
    pub check_count: usize,
    pub has_build: bool,
    pub has_build_or_test: bool,
    pub has_useless: bool,
    /// At least one useless check and no other classified check.
    pub useless_only: bool,
    pub categories: BTreeMap<CheckCategory, usize>,
}

pub fn classify_pipeline(event: &UpdateEvent) -> PipelineQuality {
    let mut categories: BTreeMap<CheckCategory, usize> = BTreeMap::new();
    for check in &event.checks {
        *categories.entry(classify_check_name(&check.name)).or_default() += 1;
    }
    let has = |c| categories.contains_key(&c);
    let has_build = has(CheckCategory::Build);
    let has_build_or_test = has_build || has(CheckCategory::Test);
    let has_useless = has(CheckCategory::Useless);
    let useless_only = has_useless
        && categories
            .keys()
            .all(|&c| c == CheckCategory::Useless || c == CheckCategory::Unclassified);
    PipelineQuality {
        check_count: event.checks.len(),
        has_build,
        has_build_or_test,
        has_useless,
        useless_only,
        categories,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::fixtures::{check, event};
    use crate::datasets::CheckConclusion;

    #[test]
    fn examples() {
        assert_eq!(classify_check_name("Travis CI"), CheckCategory::Build);
        assert_eq!(classify_check_name("eslint"), CheckCategory::Lint);
        assert_eq!(classify_check_name("WIP"), CheckCategory::Useless);
        assert_eq!(
            classify_check_name("GitGuardian Security Checks"),
            CheckCategory::SecurityAnalysis
        );
        assert_eq!(classify_check_name("karma"), CheckCategory::Test);
        assert_eq!(classify_check_name("totally-novel-xyz123"), CheckCategory::Unclassified);
    }

    #[test]
    fn any_name_containing_check_is_a_test() {
        // The Test row carries a bare `check` alternative.
        assert_eq!(classify_check_name("totally-novel-check-xyz123"), CheckCategory::Test);
    }

    #[test]
    fn matching_is_case_insensitive_and_anchors_hold() {
        assert_eq!(classify_check_name("TRAVIS ci"), CheckCategory::Build);
        assert_eq!(classify_check_name("stale"), CheckCategory::Useless);
        assert_eq!(classify_check_name("STALE"), CheckCategory::Useless);
        // `^stale$` is anchored; the name falls through to Unclassified.
        assert_eq!(classify_check_name("stale-bot"), CheckCategory::Unclassified);
        assert_eq!(classify_check_name("ci"), CheckCategory::Build);
        assert_eq!(classify_check_name("3.9"), CheckCategory::Build);
        assert_eq!(classify_check_name("3.10"), CheckCategory::Unclassified);
    }

    #[test]
    fn every_pattern_compiles() {
        assert_eq!(CLASSIFIER.len(), 6);
    }

    fn pipeline(names: &[&str]) -> PipelineQuality {
        let mut ev = event("c", "p", "1.0.0", "1.0.1", 0, true, false);
        ev.checks = names
            .iter()
            .map(|n| check(n, CheckConclusion::Success))
            .collect();
        classify_pipeline(&ev)
    }

    #[test]
    fn pipeline_flags() {
        let q = pipeline(&["build", "test", "WIP"]);
        assert_eq!(q.check_count, 3);
        assert!(q.has_build_or_test && q.has_useless && !q.useless_only);

        let q = pipeline(&["WIP", "stale"]);
        assert!(q.useless_only && q.has_useless && !q.has_build_or_test);

        let q = pipeline(&["WIP", "zzz-unknown-zzz"]);
        assert!(q.useless_only);

        let q = pipeline(&["WIP", "eslint"]);
        assert!(!q.useless_only);

        let q = pipeline(&[]);
        assert_eq!(q.check_count, 0);
        assert!(!q.has_build_or_test && !q.has_useless && !q.useless_only);
        assert!(q.categories.is_empty());
    }

    #[test]
    fn category_counts_sum_to_check_count() {
        let q = pipeline(&["build", "build", "karma", "nothing-here-qq"]);
        assert_eq!(q.categories.values().sum::<usize>(), q.check_count);
        assert_eq!(q.categories[&CheckCategory::Build], 2);
    }
}
