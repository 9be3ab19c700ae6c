mod common;

use common::{scenario, script};
use hmt_core::gcs::{parse_log, replay, replay_records, GcsService, ReplayError};
use hmt_core::harness::run_scenario;

const RUNS: [(&str, &str); 7] = [
    ("river-rescue", "confirm"),
    ("river-rescue", "reject"),
    ("river-rescue", "absent"),
    ("river-rescue", "slow"),
    ("river-rescue", "fast"),
    ("river-reflection", "reflection"),
    ("trust-calibration", "oracle"),
];

#[test]
fn replay_reproduces_final_state_exactly() {
    for (s, h) in RUNS {
        let out = run_scenario(&scenario(s), Some(script(h)), 7).unwrap();
        let r = replay(&out.log, None).unwrap();
        assert!(r.header.is_some());
        assert!(r.replayer.footer().is_some());
        let live = out.final_state.to_json();
        let rebuilt = r.replayer.gcs().snapshot().to_json();
        assert_eq!(live, rebuilt, "{s}/{h}");
        let (a, b) = (&out.final_state, r.replayer.gcs().snapshot());
        assert_eq!(
            serde_json::to_string(&a.triage).unwrap(),
            serde_json::to_string(&b.triage).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&a.fleet).unwrap(),
            serde_json::to_string(&b.fleet).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&a.coordination).unwrap(),
            serde_json::to_string(&b.coordination).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&a.trust).unwrap(),
            serde_json::to_string(&b.trust).unwrap()
        );
    }
}

#[test]
fn prefix_replay_matches_truncated_log() {
    let out = run_scenario(&scenario("river-rescue"), Some(script("confirm")), 7).unwrap();
    let records = parse_log(&out.log).unwrap();
    let lines: Vec<&str> = out.log.lines().collect();
    for n in [
        1,
        10,
        records.len() / 3,
        records.len() / 2,
        records.len() - 1,
    ] {
        let by_seq = replay_records(&records, None, Some(n as u64 - 1)).unwrap();
        assert_eq!(by_seq.replayer.applied(), Some(n as u64 - 1));
        let text = lines[..n].join("\n");
        let by_text = replay(&text, None).unwrap();
        assert_eq!(
            by_seq.replayer.gcs().snapshot().to_json(),
            by_text.replayer.gcs().snapshot().to_json()
        );
    }
}

#[test]
fn empty_log_gives_initial_state() {
    let spec = scenario("river-rescue");
    assert!(matches!(replay("", None), Err(ReplayError::MissingHeader)));
    let r = replay("", Some(&spec)).unwrap();
    assert_eq!(r.replayer.applied(), None);
    assert_eq!(
        r.replayer.gcs().snapshot().to_json(),
        GcsService::new(&spec).unwrap().snapshot().to_json()
    );
}

#[test]
fn seq_gap_is_rejected() {
    let out = run_scenario(&scenario("river-reflection"), Some(script("reflection")), 7).unwrap();
    let mut lines: Vec<&str> = out.log.lines().collect();
    lines.remove(5);
    let err = replay(&lines.join("\n"), None).unwrap_err();
    assert!(
        matches!(
            err,
            ReplayError::Gap {
                expected: 5,
                found: 6
            }
        ),
        "{err}"
    );
}

#[test]
fn malformed_line_reports_its_number() {
    let out = run_scenario(&scenario("river-reflection"), Some(script("reflection")), 7).unwrap();
    let mut lines: Vec<&str> = out.log.lines().collect();
    lines[3] = "{not json";
    assert!(matches!(
        replay(&lines.join("\n"), None),
        Err(ReplayError::Parse { line: 4, .. })
    ));
}
