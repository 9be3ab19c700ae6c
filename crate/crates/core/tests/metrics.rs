//! Run metrics checked against a second scan of the log that reads raw JSON.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{scenario, script};
use hmt_core::harness::{run_scenario, RunMetrics};
use serde_json::Value;

fn haversine_m(a: &Value, b: &Value) -> f64 {
    let (la1, lo1) = (
        a["lat"].as_f64().unwrap().to_radians(),
        a["lon"].as_f64().unwrap().to_radians(),
    );
    let (la2, lo2) = (
        b["lat"].as_f64().unwrap().to_radians(),
        b["lon"].as_f64().unwrap().to_radians(),
    );
    let h = ((la2 - la1) / 2.0).sin().powi(2)
        + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6_371_008.8 * h.sqrt().asin()
}

fn scan(log: &str) -> RunMetrics {
    let mut m = RunMetrics::default();
    let mut victims = Vec::new();
    let mut opened = BTreeMap::new();
    let mut lags = Vec::new();
    let mut shown: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    let mut hidden: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    for line in log.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        let p = &rec["envelope"]["payload"];
        let d = &p["data"];
        match p["kind"].as_str().unwrap() {
            "header" => {
                for o in d["spec"]["scene"]["objects"]
                    .as_array()
                    .into_iter()
                    .flatten()
                {
                    if o["kind"] == "victim" {
                        victims.push(o["location"].clone());
                    }
                }
            }
            "detection" if d["reverted"] != true && d["decision"] != "continue_search" => {
                if victims
                    .iter()
                    .any(|v| haversine_m(v, &d["detection"]["location"]) <= 15.0)
                {
                    m.detections_true += 1;
                } else {
                    m.detections_false += 1;
                }
            }
            "session" => {
                let id = d["session"].as_u64().unwrap();
                let at = d["at"].as_u64().unwrap();
                match d["event"].as_str().unwrap() {
                    "HELP_REQUESTED" => {
                        m.sessions_opened += 1;
                        opened.insert(id, at);
                    }
                    "CONFIRMATION" => {
                        m.sessions_confirmed += 1;
                        lags.push(at - opened[&id]);
                    }
                    "REFUTATION" => {
                        m.sessions_refuted += 1;
                        lags.push(at - opened[&id]);
                    }
                    "NO_RESPONSE" => m.sessions_timed_out += 1,
                    other => panic!("unknown session event {other}"),
                }
            }
            "triage" => {
                let view = d["view"].as_str().unwrap().to_string();
                let ids = |k: &str| {
                    d[k].as_array()
                        .unwrap()
                        .iter()
                        .map(|v| v.as_u64().unwrap())
                        .collect::<Vec<_>>()
                };
                shown
                    .entry(view.clone())
                    .or_default()
                    .extend(ids("displayed"));
                hidden.entry(view).or_default().extend(ids("suppressed"));
            }
            "adaptation" => m.adaptations += 1,
            "explanation" => m.explanations += 1,
            "note" => match d["kind"].as_str().unwrap() {
                "tug_of_war" => m.tug_of_war_conflicts += 1,
                "human_failure_to_respond" => m.human_failures_to_respond += 1,
                "stale_action" => m.stale_actions += 1,
                _ => {}
            },
            "rule_change" if d["origin"] == "machine" => m.rule_changes_machine += 1,
            "rule_change" => m.rule_changes_human += 1,
            "footer" => {
                m.mission_duration_ms = d["at"].as_u64().unwrap();
                m.complete = d["complete"].as_bool().unwrap();
                m.aborted = d["aborted"].as_bool().unwrap();
            }
            _ => {}
        }
    }
    if !lags.is_empty() {
        m.mean_response_ms = Some(lags.iter().sum::<u64>() as f64 / lags.len() as f64);
    }
    m.alerts_displayed = shown
        .into_iter()
        .map(|(v, s)| (v, s.len() as u64))
        .collect();
    m.alerts_suppressed = hidden
        .into_iter()
        .map(|(v, s)| (v, s.len() as u64))
        .collect();
    m
}

#[test]
fn metrics_match_independent_scan() {
    for (s, h) in [
        ("river-rescue", "confirm"),
        ("river-rescue", "reject"),
        ("river-rescue", "absent"),
        ("river-rescue", "slow"),
        ("river-reflection", "reflection"),
        ("trust-calibration", "oracle"),
    ] {
        let out = run_scenario(&scenario(s), Some(script(h)), 7).unwrap();
        assert_eq!(out.metrics, scan(&out.log), "{s}/{h}");
    }
}

#[test]
fn session_counts_partition_opened_sessions() {
    for h in ["confirm", "reject", "absent", "slow"] {
        let m = run_scenario(&scenario("river-rescue"), Some(script(h)), 7)
            .unwrap()
            .metrics;
        assert_eq!(
            m.sessions_opened,
            m.sessions_confirmed + m.sessions_refuted + m.sessions_timed_out,
            "{h}"
        );
        assert!(m.complete, "{h}");
        assert_eq!(m.explanations, m.adaptations, "{h}");
    }
}

#[test]
fn time_cap_marks_run_incomplete() {
    let mut spec = scenario("river-rescue");
    spec.time_cap_ms = 40_000;
    let out = run_scenario(&spec, Some(script("confirm")), 7).unwrap();
    assert!(!out.metrics.complete);
    assert!(out.metrics.mission_duration_ms >= 40_000);
    assert_eq!(out.metrics, scan(&out.log));
}
