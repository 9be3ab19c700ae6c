mod common;

use std::time::Instant;

use common::{records, scenario, script};
use hmt_core::harness::{compare_logs, run_scenario, LogComparison};

#[test]
fn same_seed_gives_identical_logs() {
    let spec = scenario("river-rescue");
    let started = Instant::now();
    let a = run_scenario(&spec, Some(script("confirm")), 7).unwrap();
    let b = run_scenario(&spec, Some(script("confirm")), 7).unwrap();
    assert!(started.elapsed().as_secs() < 60);
    assert!(a.metrics.complete);
    assert_eq!(a.log, b.log);
    assert_eq!(compare_logs(&a.log, &b.log), LogComparison::Equal);
}

#[test]
fn different_seeds_diverge_at_a_reported_seq() {
    let spec = scenario("river-rescue");
    let a = run_scenario(&spec, Some(script("confirm")), 7).unwrap();
    let b = run_scenario(&spec, Some(script("confirm")), 8).unwrap();
    let LogComparison::Diverged { seq } = compare_logs(&a.log, &b.log) else {
        panic!("different seeds produced the same log");
    };
    let la: Vec<&str> = a.log.lines().collect();
    let lb: Vec<&str> = b.log.lines().collect();
    let s = seq as usize;
    assert_eq!(la[..s], lb[..s]);
    assert_ne!(la.get(s), lb.get(s));
}

#[test]
fn compare_logs_reports_length_mismatch() {
    assert_eq!(compare_logs("a\nb\n", "a\nb\n"), LogComparison::Equal);
    assert_eq!(
        compare_logs("a\nb\n", "a\n"),
        LogComparison::Diverged { seq: 1 }
    );
    assert_eq!(compare_logs("", "x\n"), LogComparison::Diverged { seq: 0 });
}

#[test]
fn log_survives_parse_and_reserialize() {
    let out = run_scenario(&scenario("river-rescue"), Some(script("absent")), 3).unwrap();
    let rewritten: String = records(&out.log)
        .iter()
        .map(|r| r.to_line() + "\n")
        .collect();
    assert_eq!(compare_logs(&out.log, &rewritten), LogComparison::Equal);
}

#[test]
fn log_seq_is_dense_and_time_monotone() {
    let out = run_scenario(&scenario("river-reflection"), Some(script("reflection")), 1).unwrap();
    let recs = records(&out.log);
    for (i, w) in recs.windows(2).enumerate() {
        assert_eq!(w[0].seq, i as u64);
        assert!(w[0].at <= w[1].at);
    }
}
