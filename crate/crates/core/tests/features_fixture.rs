use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;

use depscore::datasets::{CheckConclusion, CheckRun, LabelPolicy, UpdateEvent};
use depscore::features::{
    client_history_metrics, feature_matrix, feature_vector, FeatureConfig, FeatureError,
    HistoryCounts,
};

fn ev(hour: i64, client: &str, provider: &str, origin: &str, target: &str, ok: bool, merged: bool) -> UpdateEvent {
    let opened = Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap() + Duration::hours(hour);
    UpdateEvent {
        client: client.into(),
        ecosystem: "npm".into(),
        provider: provider.into(),
        origin: origin.into(),
        target: target.into(),
        opened_at: opened,
        closed_at: Some(opened + Duration::minutes(30)),
        merged,
        merged_by_human: Some(merged),
        base_ci_passing: true,
        checks: vec![CheckRun {
            name: "build".into(),
            conclusion: if ok { CheckConclusion::Success } else { CheckConclusion::Failure },
        }],
    }
}

/// Six PRs; the last one is the focal PR.
fn six_events() -> Vec<UpdateEvent> {
    vec![
        ev(0, "app", "lodash", "4.17.19", "4.17.21", true, true),
        ev(1, "other", "lodash", "4.17.20", "4.17.21", false, false),
        ev(2, "app", "react", "16.0.0", "17.0.0", true, false),
        ev(3, "other", "lodash", "4.16.0", "4.17.21", true, true),
        ev(4, "app", "lodash", "3.0.0", "4.17.21", false, false),
        ev(5, "app", "lodash", "4.17.20", "4.17.21", true, true),
    ]
}

#[test]
fn six_event_fixture_matches_hand_enumeration() {
    let events = six_events();
    let v = feature_vector(&events, &events[5], FeatureConfig::default()).unwrap();

    // Earlier candidates for lodash 4.17.21:
    //   4.17.19 pass, 4.17.20 fail, 4.16.0 pass, 3.0.0 fail.
    // exact (4.17.20): N=1 S=0; patch: N=2 S=1; minor: N=3 S=2; major: N=4 S=2.
    assert_eq!(v.exact_score, 1.0 / 3.0);
    assert_eq!(v.patch_range_score, 2.0 / 4.0);
    assert_eq!(v.minor_range_score, 3.0 / 5.0);
    assert_eq!(v.major_range_score, 3.0 / 6.0);
    assert_eq!(
        (v.meta.exact_candidates, v.meta.patch_candidates, v.meta.minor_candidates, v.meta.major_candidates),
        (1, 2, 3, 4)
    );

    // Earlier "app" PRs: lodash pass+merged, react pass, lodash fail.
    assert_eq!(
        (v.passing_db_prs, v.passing_provider_db_prs, v.merged_db_prs, v.merged_provider_db_prs),
        (2, 1, 1, 1)
    );
    assert!(v.label_merged);
    assert!(!v.meta.range_fallback);
}

#[test]
fn first_event_has_empty_history_and_neutral_ranges() {
    let events = six_events();
    let v = feature_vector(&events, &events[0], FeatureConfig::default()).unwrap();
    assert_eq!(
        (v.passing_db_prs, v.passing_provider_db_prs, v.merged_db_prs, v.merged_provider_db_prs),
        (0, 0, 0, 0)
    );
    for s in [v.exact_score, v.patch_range_score, v.minor_range_score, v.major_range_score] {
        assert_eq!(s, 0.5);
    }
}

#[test]
fn three_prior_events_history() {
    let events = vec![
        ev(0, "c", "p", "1.0.0", "1.0.1", true, true),
        ev(1, "c", "q", "1.0.0", "1.0.1", true, false),
        ev(2, "c", "q", "1.0.1", "1.0.2", false, false),
        ev(3, "c", "p", "1.0.1", "1.0.2", true, false),
    ];
    let h = client_history_metrics(&events, &events[3], LabelPolicy::Merged).unwrap();
    assert_eq!(
        h,
        HistoryCounts {
            passing: 2,
            passing_provider: 1,
            merged: 1,
            merged_provider: 1
        }
    );
}

#[test]
fn simultaneous_events_do_not_see_each_other() {
    let events = vec![
        ev(0, "c", "p", "1.0.0", "1.0.1", true, true),
        ev(0, "c", "p", "1.0.0", "1.0.2", true, true),
    ];
    for focal in &events {
        let h = client_history_metrics(&events, focal, LabelPolicy::Merged).unwrap();
        assert_eq!(h, HistoryCounts::default());
    }
}

#[test]
fn focal_must_be_in_the_list() {
    let events = six_events();
    let stranger = ev(9, "x", "y", "1.0.0", "2.0.0", true, true);
    assert_eq!(
        client_history_metrics(&events, &stranger, LabelPolicy::Merged),
        Err(FeatureError::FocalNotFound)
    );
}

#[test]
fn unparseable_target_falls_back_to_exact() {
    let events = vec![
        ev(0, "a", "p", "2021.01", "nightly", true, true),
        ev(1, "b", "p", "2021.01", "nightly", true, true),
    ];
    let v = feature_vector(&events, &events[1], FeatureConfig::default()).unwrap();
    assert!(v.meta.range_fallback);
    assert_eq!(v.exact_score, 2.0 / 3.0);
    assert_eq!(v.patch_range_score, v.exact_score);
    assert_eq!(v.major_range_score, v.exact_score);
}

#[test]
fn human_merge_policy_changes_labels_and_history() {
    let mut events = six_events();
    events[0].merged_by_human = Some(false);
    events[5].merged_by_human = None;
    let cfg = FeatureConfig {
        label_policy: LabelPolicy::MergedByHuman,
        include_non_candidates: false,
    };
    let v = feature_vector(&events, &events[5], cfg).unwrap();
    assert!(!v.label_merged);
    assert_eq!(v.merged_db_prs, 0);
}

fn arb_events() -> impl Strategy<Value = Vec<UpdateEvent>> {
    let one = (0i64..20, 0usize..3, 0usize..2, 0usize..4, any::<bool>(), any::<bool>(), any::<bool>());
    prop::collection::vec(one, 1..40).prop_map(|raw| {
        let versions = ["1.0.0", "1.0.1", "1.1.0", "2.0.0", "2.0.1"];
        raw.into_iter()
            .map(|(h, c, p, o, ok, merged, base)| {
                let mut e = ev(h, ["a", "b", "c"][c], ["p", "q"][p], versions[o], versions[o + 1], ok, merged);
                e.base_ci_passing = base;
                e
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn vector_invariants(events in arb_events()) {
        for v in feature_matrix(&events, FeatureConfig::default()) {
            prop_assert!(v.passing_provider_db_prs <= v.passing_db_prs);
            prop_assert!(v.merged_provider_db_prs <= v.merged_db_prs);
            for s in [v.exact_score, v.patch_range_score, v.minor_range_score, v.major_range_score] {
                prop_assert!(s > 0.0 && s < 1.0);
            }
            prop_assert!(v.meta.exact_candidates <= v.meta.major_candidates);
            prop_assert!(v.meta.patch_candidates <= v.meta.minor_candidates);
            prop_assert!(v.meta.minor_candidates <= v.meta.major_candidates);
        }
    }

    #[test]
    fn matrix_preserves_event_order(events in arb_events()) {
        let m = feature_matrix(&events, FeatureConfig { include_non_candidates: true, ..FeatureConfig::default() });
        prop_assert_eq!(m.len(), events.len());
        for (v, e) in m.iter().zip(&events) {
            prop_assert_eq!(&v.meta.key, &e.key());
            prop_assert_eq!(v.meta.opened_at, e.opened_at);
        }
    }
}
