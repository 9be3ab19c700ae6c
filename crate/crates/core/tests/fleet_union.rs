mod common;

use std::collections::BTreeMap;

use common::fleet::check_fleet;
use common::{scenario, script};
use hmt_core::gcs::EventLogWriter;
use hmt_core::harness::run_scenario_with;
use proptest::prelude::*;

#[test]
fn random_fleets_match_union_oracle() {
    for seed in 0..200 {
        check_fleet(seed);
    }
}

proptest! {
    #[test]
    fn any_fleet_matches_union_oracle(seed in any::<u64>()) {
        check_fleet(seed);
    }
}

#[test]
fn reference_snapshot_shows_five_placements() {
    let spec = scenario("river-rescue");
    let mut seen = None;
    run_scenario_with(
        &spec,
        Some(script("confirm")),
        7,
        EventLogWriter::new(),
        |f| {
            if seen.is_none()
                && f.fleet
                    .placement
                    .tokens
                    .get("blue")
                    .is_some_and(|t| t.node == "victim_detected")
            {
                seen = Some(f.fleet.clone());
            }
        },
    )
    .unwrap();
    let snap = seen.expect("blue never waited for confirmation");
    let placed: BTreeMap<&str, &str> = snap
        .placement
        .tokens
        .iter()
        .map(|(k, t)| (k.as_str(), t.node.as_str()))
        .collect();
    let want = BTreeMap::from([
        ("blue", "victim_detected"),
        ("green", "standby"),
        ("orange", "searching"),
        ("purple", "surveillance"),
        ("red", "searching"),
    ]);
    assert_eq!(placed, want);
    assert_eq!(snap.placement.tokens["purple"].color, "purple");
}
