//! Random alert and rule streams checked step by step against the top-k oracle.

use std::collections::BTreeSet;

use hmt_core::adaptation::Initiator;
use hmt_core::triage::{Alert, AlertRule, RuleSet, TriageEngine};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::topk_oracle;

pub const TYPES: [&str; 5] = [
    "adaptation",
    "victim_sighted",
    "directive_rejected",
    "stale_action",
    "battery_low",
];
pub const VIEWS: [(&str, usize); 3] = [("operator", 3), ("mission", 1), ("ticker", 0)];

#[derive(Debug, Clone)]
pub enum Op {
    Submit {
        ty: usize,
        essential: bool,
        ttl: Option<u64>,
    },
    Withdraw(usize),
    Advance(u64),
    Rule {
        ty: usize,
        view: usize,
        priority: Option<u8>,
    },
}

pub fn random_op(rng: &mut ChaCha8Rng) -> Op {
    match rng.gen_range(0..10) {
        0..=3 => Op::Submit {
            ty: rng.gen_range(0..TYPES.len()),
            essential: rng.gen_bool(0.1),
            ttl: rng.gen_bool(0.5).then(|| rng.gen_range(0..500)),
        },
        4..=5 => Op::Withdraw(rng.gen_range(0..64)),
        6..=7 => Op::Advance(rng.gen_range(0..100)),
        _ => Op::Rule {
            ty: rng.gen_range(0..TYPES.len()),
            view: rng.gen_range(0..VIEWS.len()),
            priority: rng.gen_bool(0.8).then(|| rng.gen_range(1..=5)),
        },
    }
}

pub struct Stream {
    pub engine: TriageEngine,
    pub rules: RuleSet,
    pub live: Vec<Alert>,
    pub now: u64,
    next_id: u64,
    pub violations: Vec<String>,
}

impl Default for Stream {
    fn default() -> Self {
        Stream::new()
    }
}

impl Stream {
    pub fn new() -> Self {
        let rules = RuleSet::new([
            AlertRule::priority("victim_sighted", "operator", 1),
            AlertRule::essential("battery_low", "mission"),
        ]);
        let mut engine = TriageEngine::new(rules.clone());
        for (v, k) in VIEWS {
            engine.register_view(v, k).unwrap();
        }
        Stream {
            engine,
            rules,
            live: Vec::new(),
            now: 0,
            next_id: 1,
            violations: Vec::new(),
        }
    }

    pub fn apply(&mut self, op: &Op) {
        match *op {
            Op::Submit { ty, essential, ttl } => {
                let a = Alert {
                    id: self.next_id,
                    alert_type: TYPES[ty].into(),
                    source: "test".into(),
                    message: String::new(),
                    raised_at: self.now,
                    expires_at: ttl.map(|t| self.now + t),
                    essential,
                };
                self.next_id += 1;
                self.engine.submit_alert(a.clone()).unwrap();
                self.live.push(a);
            }
            Op::Withdraw(i) => {
                if !self.live.is_empty() {
                    let a = self.live.remove(i % self.live.len());
                    self.engine.withdraw(a.id).unwrap();
                }
            }
            Op::Advance(dt) => {
                self.now += dt;
                let now = self.now;
                let (expired, _) = self.engine.expire(now);
                let mut want: Vec<u64> = self
                    .live
                    .iter()
                    .filter(|a| a.expires_at.is_some_and(|e| e <= now))
                    .map(|a| a.id)
                    .collect();
                let mut got = expired.clone();
                want.sort();
                got.sort();
                if want != got {
                    self.violations
                        .push(format!("expired {got:?}, expected {want:?}"));
                }
                self.live
                    .retain(|a| !a.expires_at.is_some_and(|e| e <= now));
            }
            Op::Rule { ty, view, priority } => {
                let rule = match priority {
                    Some(p) => AlertRule::priority(TYPES[ty], VIEWS[view].0, p),
                    None => AlertRule::essential(TYPES[ty], VIEWS[view].0),
                };
                self.engine
                    .update_rule(rule.clone(), Initiator::Human)
                    .unwrap();
                self.rules.set(rule);
            }
        }
    }

    pub fn check(&mut self, step: usize) {
        for (v, k) in VIEWS {
            let state = self.engine.view(v).unwrap();
            let (want_shown, want_hidden) = topk_oracle(&self.live, &self.rules, v, k);
            let shown: BTreeSet<u64> = state.displayed().into_iter().collect();
            let hidden: BTreeSet<u64> = state.suppressed().into_iter().collect();
            if shown != want_shown || hidden != want_hidden {
                self.violations.push(format!(
                    "step {step} view {v}: shown {shown:?} vs {want_shown:?}"
                ));
            }
            if state.displayed_non_essential().len() > k {
                self.violations
                    .push(format!("step {step} view {v}: over threshold"));
            }
            for a in self.live.iter().filter(|a| a.essential) {
                if !shown.contains(&a.id) {
                    self.violations
                        .push(format!("step {step} view {v}: essential {} hidden", a.id));
                }
            }
        }
    }
}

/// Runs `n` random events and returns every mismatch found.
pub fn run(seed: u64, n: usize) -> Vec<String> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Stream::new();
    for step in 0..n {
        let op = random_op(&mut rng);
        s.apply(&op);
        s.check(step);
    }
    s.violations
}
