mod common;

use std::collections::BTreeMap;

use common::{payloads, scenario, script};
use hmt_core::agent::DetectionDecision;
use hmt_core::harness::{run_scenario, RunOutput};
use hmt_core::message::{NoteKind, Payload, SessionEvent};

struct SessionTally {
    opened: BTreeMap<u64, (String, u64)>,
    terminal: BTreeMap<u64, Vec<(SessionEvent, u64)>>,
}

fn tally(out: &RunOutput) -> SessionTally {
    let mut t = SessionTally {
        opened: BTreeMap::new(),
        terminal: BTreeMap::new(),
    };
    for (_, p) in payloads(&out.log) {
        if let Payload::Session(s) = p {
            if s.event == SessionEvent::HelpRequested {
                t.opened.insert(s.session, (s.uav.clone(), s.at));
            } else {
                t.terminal
                    .entry(s.session)
                    .or_default()
                    .push((s.event, s.at));
            }
        }
    }
    t
}

fn run(scenario_name: &str, script_name: &str) -> RunOutput {
    run_scenario(&scenario(scenario_name), Some(script(script_name)), 7).unwrap()
}

/// State the UAV enters first after `at`.
fn next_state(out: &RunOutput, uav: &str, at: u64) -> Option<String> {
    payloads(&out.log).into_iter().find_map(|(_, p)| match p {
        Payload::StateChange(c) if c.uav == uav && c.at >= at && c.from == "victim_detected" => {
            Some(c.to)
        }
        _ => None,
    })
}

fn check_one_terminal_each(out: &RunOutput, expected: SessionEvent) -> SessionTally {
    let t = tally(out);
    assert!(!t.opened.is_empty(), "scenario opened no sessions");
    for id in t.opened.keys() {
        let ends = &t.terminal[id];
        assert_eq!(ends.len(), 1, "session {id} ended {} times", ends.len());
        assert_eq!(ends[0].0, expected);
    }
    assert_eq!(t.terminal.len(), t.opened.len());
    t
}

#[test]
fn confirmations_lead_to_tracking() {
    for name in ["river-rescue", "trust-calibration"] {
        let out = run(name, "confirm");
        let t = check_one_terminal_each(&out, SessionEvent::Confirmation);
        for (id, (uav, _)) in &t.opened {
            let at = t.terminal[id][0].1;
            assert_eq!(next_state(&out, uav, at).as_deref(), Some("tracking"));
        }
        assert_eq!(out.metrics.sessions_confirmed, t.opened.len() as u64);
    }
}

#[test]
fn rejections_resume_searching() {
    for name in ["river-rescue", "trust-calibration"] {
        let out = run(name, "reject");
        let t = check_one_terminal_each(&out, SessionEvent::Refutation);
        for (id, (uav, _)) in &t.opened {
            let at = t.terminal[id][0].1;
            assert_eq!(next_state(&out, uav, at).as_deref(), Some("searching"));
        }
    }
}

#[test]
fn absent_human_times_out_every_session() {
    for name in ["river-rescue", "trust-calibration"] {
        let out = run(name, "absent");
        let t = check_one_terminal_each(&out, SessionEvent::NoResponse);
        let all = payloads(&out.log);
        let failures: Vec<u64> = all
            .iter()
            .filter_map(|(_, p)| match p {
                Payload::Note(n) if n.kind == NoteKind::HumanFailureToRespond => n.session,
                _ => None,
            })
            .collect();
        let mut expected: Vec<u64> = t.opened.keys().copied().collect();
        let mut got = failures.clone();
        expected.sort();
        got.sort();
        assert_eq!(got, expected);
        let reverted = all
            .iter()
            .filter(|(_, p)| matches!(p, Payload::Detection(d) if d.reverted))
            .count();
        assert_eq!(reverted, t.opened.len());
        assert_eq!(out.metrics.sessions_timed_out, t.opened.len() as u64);
        assert_eq!(out.metrics.human_failures_to_respond, t.opened.len() as u64);
    }
}

#[test]
fn timeouts_fire_at_the_deadline() {
    let spec = scenario("river-rescue");
    let out = run_scenario(&spec, Some(script("absent")), 7).unwrap();
    let t = tally(&out);
    for (id, (_, opened_at)) in &t.opened {
        let (_, at) = t.terminal[id][0];
        assert_eq!(at, opened_at + spec.coordination.waiting_period_ms);
    }
}

#[test]
fn reverted_decision_uses_scores_alone() {
    let out = run("river-rescue", "absent");
    for (_, p) in payloads(&out.log) {
        if let Payload::Detection(d) = p {
            if d.reverted {
                let expect = if d.detection.confidence >= 0.8 && d.detection.reliability >= 0.8 {
                    DetectionDecision::ActAutonomously
                } else if d.detection.confidence >= 0.8 {
                    DetectionDecision::RequestHelp
                } else {
                    DetectionDecision::ContinueSearch
                };
                assert_eq!(d.decision, expect);
            }
        }
    }
}

#[test]
fn session_counts_partition_opened() {
    for s in ["confirm", "reject", "absent", "slow", "oracle"] {
        let m = run("trust-calibration", s).metrics;
        assert_eq!(
            m.sessions_confirmed + m.sessions_refuted + m.sessions_timed_out,
            m.sessions_opened,
            "{s}"
        );
    }
}

#[test]
fn confirmed_victim_gets_a_delivery() {
    let out = run_scenario(&scenario("river-rescue"), Some(script("confirm")), 7).unwrap();
    let states: Vec<(String, String)> = payloads(&out.log)
        .into_iter()
        .filter_map(|(_, p)| match p {
            Payload::StateChange(c) => Some((c.uav, c.to)),
            _ => None,
        })
        .collect();
    let tracking = states
        .iter()
        .position(|(_, s)| s == "tracking")
        .expect("nobody tracked");
    let delivery = states
        .iter()
        .position(|(_, s)| s == "delivery")
        .expect("nobody delivered");
    assert!(tracking < delivery);
    assert_eq!(states[delivery].0, "green");
}
