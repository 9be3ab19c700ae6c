mod common;

use common::{
    exhaustive_alternations, payloads, quadratic_alternations, random_log, scenario, script,
};
use hmt_core::adaptation::{Initiator, ALTITUDE};
use hmt_core::coord::{longest_alternation, ActionLog, ActionLogEntry};
use hmt_core::harness::run_scenario;
use hmt_core::message::{NoteKind, Payload};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn detector_agrees_with_quadratic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1_000 {
        let n = rng.gen_range(0..40);
        let log = random_log(&mut rng, n);
        assert_eq!(longest_alternation(&log), quadratic_alternations(&log));

        let now = log.last().map_or(0, |e| e.at);
        let window = rng.gen_range(1_000..60_000);
        let k = rng.gen_range(1..6);
        let mut al = ActionLog::default();
        for e in &log {
            al.record(e.clone()).unwrap();
        }
        let in_window: Vec<ActionLogEntry> = log
            .iter()
            .filter(|e| e.at + window >= now)
            .cloned()
            .collect();
        let want = quadratic_alternations(&in_window) >= k;
        assert_eq!(al.detect_tug_of_war("red", now, window, k).is_some(), want);
    }
}

proptest! {
    #[test]
    fn quadratic_oracle_matches_exhaustive(seed in any::<u64>(), n in 0usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = random_log(&mut rng, n);
        prop_assert_eq!(quadratic_alternations(&log), exhaustive_alternations(&log));
        prop_assert_eq!(longest_alternation(&log), exhaustive_alternations(&log));
    }
}

#[test]
fn reflection_scenario_curtails_at_three_alternations() {
    let out = run_scenario(&scenario("river-reflection"), Some(script("reflection")), 7).unwrap();
    let all = payloads(&out.log);
    let notes: Vec<_> = all
        .iter()
        .filter_map(|(_, p)| match p {
            Payload::Note(n) => Some(n.clone()),
            _ => None,
        })
        .collect();
    let tug: Vec<_> = notes
        .iter()
        .filter(|n| n.kind == NoteKind::TugOfWar)
        .collect();
    assert_eq!(tug.len(), 1);
    assert_eq!(tug[0].detail, "3 alternations on altitude");
    let curtailed_at = notes
        .iter()
        .find(|n| n.kind == NoteKind::Curtailed)
        .unwrap()
        .at;
    let restored_at = notes
        .iter()
        .find(|n| n.kind == NoteKind::Restored)
        .unwrap()
        .at;
    assert_eq!(curtailed_at, tug[0].at);
    assert!(restored_at > curtailed_at);

    let machine_altitude: Vec<u64> = all
        .iter()
        .filter_map(|(_, p)| match p {
            Payload::Adaptation(e)
                if e.initiator == Initiator::Machine
                    && e.control.as_ref().is_some_and(|c| c.dimension == ALTITUDE) =>
            {
                Some(e.at)
            }
            _ => None,
        })
        .collect();
    assert!(machine_altitude
        .iter()
        .all(|&t| t <= curtailed_at || t >= restored_at));
    assert!(
        machine_altitude.iter().any(|&t| t > restored_at),
        "autonomy never resumed"
    );

    // The chain before the conflict: machine, human, machine, human.
    let before: Vec<_> = all
        .iter()
        .filter_map(|(_, p)| match p {
            Payload::Adaptation(e)
                if e.control.as_ref().is_some_and(|c| c.dimension == ALTITUDE)
                    && e.at <= curtailed_at =>
            {
                Some(e.initiator)
            }
            _ => None,
        })
        .collect();
    assert_eq!(
        before,
        [
            Initiator::Machine,
            Initiator::Human,
            Initiator::Machine,
            Initiator::Human
        ]
    );
    assert_eq!(out.metrics.tug_of_war_conflicts, 1);
    assert!(!out.final_state.coordination.autonomy().any_curtailed("red"));
}
