mod common;

use common::{payloads, scenario, script};
use hmt_core::adaptation::Initiator;
use hmt_core::harness::run_scenario;
use hmt_core::message::Payload;
use hmt_core::triage::{
    AlertRule, ResponsivenessConfig, ResponsivenessMetric, RuleEntry, RuleSet, TriageEngine,
};
use proptest::prelude::*;

fn rule_changes(log: &str) -> Vec<hmt_core::message::RuleChange> {
    payloads(log)
        .into_iter()
        .filter_map(|(_, p)| match p {
            Payload::RuleChange(c) => Some(c),
            _ => None,
        })
        .collect()
}

#[test]
fn slow_operator_triggers_machine_demotion() {
    let out = run_scenario(&scenario("river-rescue"), Some(script("slow")), 7).unwrap();
    let changes = rule_changes(&out.log);
    let machine: Vec<_> = changes
        .iter()
        .filter(|c| c.origin == Initiator::Machine)
        .collect();
    assert!(!machine.is_empty());
    assert!(machine.iter().all(|c| matches!((c.previous, c.entry), (Some(RuleEntry::Priority(a)), RuleEntry::Priority(b)) if b == a + 1)));
    assert!(changes
        .iter()
        .all(
            |c| c.previous != Some(RuleEntry::Essential) && c.entry != RuleEntry::Essential
                || c.origin == Initiator::Human
        ));
    assert_eq!(out.metrics.rule_changes_machine, machine.len() as u64);
}

#[test]
fn fast_operator_keeps_baseline_rules() {
    let out = run_scenario(&scenario("river-rescue"), Some(script("fast")), 7).unwrap();
    let changes = rule_changes(&out.log);
    assert!(changes.iter().all(|c| c.origin != Initiator::Machine));
    let rules = out.final_state.triage.rules();
    for r in rules.iter() {
        assert_eq!(
            Some(r.entry),
            rules.baseline(&r.alert_type, &r.view),
            "{}/{}",
            r.alert_type,
            r.view
        );
    }
}

#[derive(Debug, Clone)]
enum Prompt {
    Answered(u64),
    Missed,
}

proptest! {
    #[test]
    fn essential_rules_never_move(
        rules in proptest::collection::vec((0usize..4, 0usize..2, proptest::option::of(1u8..=5)), 1..12),
        prompts in proptest::collection::vec(prop_oneof![(0u64..20_000).prop_map(Prompt::Answered), Just(Prompt::Missed)], 1..40),
    ) {
        let types = ["a", "b", "c", "d"];
        let views = ["v1", "v2"];
        let set = RuleSet::new(rules.iter().map(|&(t, v, p)| match p {
            Some(p) => AlertRule::priority(types[t], views[v], p),
            None => AlertRule::essential(types[t], views[v]),
        }));
        let mut engine = TriageEngine::new(set.clone());
        for v in views {
            engine.register_view(v, 2).unwrap();
        }
        let cfg = ResponsivenessConfig::default();
        let mut metric = ResponsivenessMetric::new(cfg.window);
        for (i, p) in prompts.iter().enumerate() {
            let at = i as u64 * 30_000;
            match p {
                Prompt::Answered(d) => metric.record_answered(at, at + d),
                Prompt::Missed => metric.record_unanswered(at),
            }
            for c in engine.adapt_frequency(&metric, &cfg, at + 20_000) {
                prop_assert_eq!(c.origin, Initiator::Machine);
                prop_assert!(c.entry != RuleEntry::Essential && c.previous != Some(RuleEntry::Essential));
            }
            for r in engine.rules().iter() {
                let base = set.entry(&r.alert_type, &r.view);
                match (base, r.entry) {
                    (RuleEntry::Essential, e) => prop_assert_eq!(e, RuleEntry::Essential),
                    (RuleEntry::Priority(b), RuleEntry::Priority(p)) => prop_assert!(p >= b && p <= 5),
                    (RuleEntry::Priority(_), RuleEntry::Essential) => prop_assert!(false, "promoted to essential"),
                }
            }
        }
    }
}
