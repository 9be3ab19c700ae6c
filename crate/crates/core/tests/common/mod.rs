//! Scenario loading and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod fleet;
pub mod stream;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use hmt_core::adaptation::{Direction, Initiator};
use hmt_core::agent::MachineSpec;
use hmt_core::bus::{ClockMode, Millis};
use hmt_core::coord::ActionLogEntry;
use hmt_core::gcs::{load_mission, parse_log, EventLogRecord, MissionSpec};
use hmt_core::harness::HumanScript;
use hmt_core::message::Payload;
use hmt_core::triage::{Alert, RuleEntry, RuleSet};
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> MissionSpec {
    load_mission(scenario_path(name), ClockMode::Lockstep)
        .expect("bundled scenario is valid")
        .spec
}

pub fn script(name: &str) -> HumanScript {
    HumanScript::load(scenario_path(&format!("human-{name}"))).expect("bundled script is valid")
}

pub fn records(log: &str) -> Vec<EventLogRecord> {
    parse_log(log).expect("log parses")
}

/// Payloads in log order, with their delivery time.
pub fn payloads(log: &str) -> Vec<(Millis, Payload)> {
    records(log)
        .into_iter()
        .map(|r| (r.at, r.envelope.payload))
        .collect()
}

/// Brute-force display set: every live essential alert plus the `k` best
/// non-essential ones by (priority, raised_at, id), found by full sorting.
pub fn topk_oracle(
    live: &[Alert],
    rules: &RuleSet,
    view: &str,
    k: usize,
) -> (BTreeSet<u64>, BTreeSet<u64>) {
    let mut essential = BTreeSet::new();
    let mut ranked = Vec::new();
    for a in live {
        let entry = if a.essential {
            RuleEntry::Essential
        } else {
            rules.entry(&a.alert_type, view)
        };
        match entry {
            RuleEntry::Essential => {
                essential.insert(a.id);
            }
            RuleEntry::Priority(p) => ranked.push((p, a.raised_at, a.id)),
        }
    }
    ranked.sort();
    let shown: BTreeSet<u64> = ranked.iter().take(k).map(|r| r.2).collect();
    let displayed = essential.union(&shown).copied().collect();
    let suppressed = ranked.iter().skip(k).map(|r| r.2).collect();
    (displayed, suppressed)
}

/// Edges keyed by (from, event, to), with the UAVs contributing each.
pub type EdgeSet = BTreeMap<(String, String, String), BTreeSet<String>>;

/// Node and edge sets of the union of several machines.
pub fn union_oracle(machines: &[(String, MachineSpec)]) -> (BTreeSet<String>, EdgeSet) {
    let mut nodes = BTreeSet::new();
    let mut edges = EdgeSet::new();
    for (uav, m) in machines {
        for s in &m.states {
            nodes.insert(s.clone());
        }
        for t in &m.transitions {
            edges
                .entry((t.from.clone(), t.event.clone(), t.to.clone()))
                .or_default()
                .insert(uav.clone());
        }
    }
    (nodes, edges)
}

fn opposes(a: &Direction, b: &Direction) -> bool {
    matches!(
        (a, b),
        (Direction::Increase, Direction::Decrease) | (Direction::Decrease, Direction::Increase)
    ) || matches!((a, b), (Direction::Set(x), Direction::Unset(y)) | (Direction::Unset(x), Direction::Set(y)) if x == y)
}

/// O(n²) longest chain where each step switches actor and reverses direction.
pub fn quadratic_alternations(entries: &[ActionLogEntry]) -> usize {
    let mut best = vec![1usize; entries.len()];
    for i in 0..entries.len() {
        for j in 0..i {
            let (a, b) = (&entries[j], &entries[i]);
            if a.actor != b.actor && opposes(&a.direction, &b.direction) {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().map_or(0, |l| l - 1)
}

/// Exhaustive version of the same count, for very short logs.
pub fn exhaustive_alternations(entries: &[ActionLogEntry]) -> usize {
    let n = entries.len();
    let mut longest = 0;
    for mask in 1u32..(1 << n) {
        let chain: Vec<&ActionLogEntry> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &entries[i])
            .collect();
        let ok = chain
            .windows(2)
            .all(|w| w[0].actor != w[1].actor && opposes(&w[0].direction, &w[1].direction));
        if ok {
            longest = longest.max(chain.len());
        }
    }
    longest.saturating_sub(1)
}

/// Closed form of the trust average after `outcomes` (true = confirmed).
pub fn ema_closed_form(initial: f64, alpha: f64, outcomes: &[bool]) -> f64 {
    let n = outcomes.len() as i32;
    let decay = 1.0 - alpha;
    let mut s = decay.powi(n) * initial;
    for (i, &x) in outcomes.iter().enumerate() {
        if x {
            s += alpha * decay.powi(n - 1 - i as i32);
        }
    }
    s
}

pub fn action(actor: Initiator, direction: Direction, at: Millis) -> ActionLogEntry {
    ActionLogEntry {
        actor,
        uav: "red".into(),
        dimension: "altitude".into(),
        direction,
        at,
        failsafe: false,
    }
}

pub fn random_log(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<ActionLogEntry> {
    let mut at = 0;
    (0..n)
        .map(|_| {
            at += rng.gen_range(0..5_000);
            let actor = if rng.gen_bool(0.5) {
                Initiator::Human
            } else {
                Initiator::Machine
            };
            let dir = match rng.gen_range(0..4) {
                0 => Direction::Increase,
                1 => Direction::Decrease,
                2 => Direction::Set("manual".into()),
                _ => Direction::Unset("manual".into()),
            };
            action(actor, dir, at)
        })
        .collect()
}
