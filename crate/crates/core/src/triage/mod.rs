//! Per-view alert triage under display thresholds.
//!
//! Each registered view shows every live alert its rules mark essential, plus
//! the first `max_threshold` non-essential alerts under the ordering
//! (priority, raised_at, id). The rest are suppressed until a slot frees up.
//! Rules can be changed at runtime by the human or the machine; a change
//! re-triages as if every live alert were replayed under the new rules.

mod responsiveness;
mod rules;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use responsiveness::{
    ResponsivenessConfig, ResponsivenessMetric, DEFAULT_LAG_MS, DEFAULT_RECOVERY_MS,
};
pub use rules::{AlertRule, RuleEntry, RuleOrigin, RuleSet, DEFAULT_PRIORITY, MIN_PRIORITY};

use crate::adaptation::Initiator;
use crate::bus::Millis;
use crate::message::RuleChange;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TriageError {
    #[error("view `{0}` is already registered")]
    DuplicateView(String),
    #[error("view `{0}` is not registered")]
    UnknownView(String),
    #[error("alert {0} already exists")]
    DuplicateAlert(u64),
    #[error("alert {0} expires before it is raised")]
    ExpiresBeforeRaised(u64),
    #[error("rule for {0}/{1} is malformed")]
    MalformedRule(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub id: u64,
    pub alert_type: String,
    pub source: String,
    pub message: String,
    pub raised_at: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<Millis>,
    /// Displayed everywhere regardless of rules.
    #[serde(default)]
    pub essential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageDecision {
    Display,
    Suppress,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewTriageState {
    pub view: String,
    pub max_threshold: usize,
    essentials: BTreeSet<(Millis, u64)>,
    ranked: BTreeSet<(u8, Millis, u64)>,
}

impl ViewTriageState {
    fn new(view: &str, max_threshold: usize) -> Self {
        ViewTriageState {
            view: view.into(),
            max_threshold,
            essentials: BTreeSet::new(),
            ranked: BTreeSet::new(),
        }
    }

    /// Essentials first (oldest first), then the capped non-essential list.
    pub fn displayed(&self) -> Vec<u64> {
        self.essentials
            .iter()
            .map(|&(_, id)| id)
            .chain(
                self.ranked
                    .iter()
                    .take(self.max_threshold)
                    .map(|&(_, _, id)| id),
            )
            .collect()
    }

    pub fn suppressed(&self) -> Vec<u64> {
        self.ranked
            .iter()
            .skip(self.max_threshold)
            .map(|&(_, _, id)| id)
            .collect()
    }

    pub fn displayed_non_essential(&self) -> Vec<u64> {
        self.ranked
            .iter()
            .take(self.max_threshold)
            .map(|&(_, _, id)| id)
            .collect()
    }

    pub fn essential_ids(&self) -> Vec<u64> {
        self.essentials.iter().map(|&(_, id)| id).collect()
    }

    fn insert(&mut self, alert: &Alert, entry: RuleEntry) {
        match entry {
            _ if alert.essential => {
                self.essentials.insert((alert.raised_at, alert.id));
            }
            RuleEntry::Essential => {
                self.essentials.insert((alert.raised_at, alert.id));
            }
            RuleEntry::Priority(p) => {
                self.ranked.insert((p, alert.raised_at, alert.id));
            }
        }
    }

    fn remove(&mut self, alert: &Alert) {
        self.essentials.remove(&(alert.raised_at, alert.id));
        self.ranked.retain(|&(_, _, id)| id != alert.id);
    }

    fn displayed_set(&self) -> BTreeSet<u64> {
        self.displayed().into_iter().collect()
    }
}

/// Decision changes in one view caused by one operation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewChanges {
    pub changes: Vec<(u64, TriageDecision)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageEngine {
    views: BTreeMap<String, ViewTriageState>,
    rules: RuleSet,
    live: BTreeMap<u64, Alert>,
}

impl TriageEngine {
    pub fn new(rules: RuleSet) -> Self {
        TriageEngine {
            views: BTreeMap::new(),
            rules,
            live: BTreeMap::new(),
        }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn views(&self) -> impl Iterator<Item = &ViewTriageState> {
        self.views.values()
    }

    pub fn view(&self, view: &str) -> Option<&ViewTriageState> {
        self.views.get(view)
    }

    pub fn live(&self) -> impl Iterator<Item = &Alert> {
        self.live.values()
    }

    pub fn alert(&self, id: u64) -> Option<&Alert> {
        self.live.get(&id)
    }

    fn entry_for(&self, alert: &Alert, view: &str) -> RuleEntry {
        if alert.essential {
            RuleEntry::Essential
        } else {
            self.rules.entry(&alert.alert_type, view)
        }
    }

    pub fn register_view(
        &mut self,
        view: &str,
        max_threshold: usize,
    ) -> Result<&ViewTriageState, TriageError> {
        if self.views.contains_key(view) {
            return Err(TriageError::DuplicateView(view.into()));
        }
        let mut state = ViewTriageState::new(view, max_threshold);
        for alert in self.live.values() {
            state.insert(alert, self.entry_for(alert, view));
        }
        Ok(self.views.entry(view.to_string()).or_insert(state))
    }

    pub fn deregister_view(&mut self, view: &str) -> Result<ViewTriageState, TriageError> {
        self.views
            .remove(view)
            .ok_or_else(|| TriageError::UnknownView(view.into()))
    }

    fn diff(before: &BTreeSet<u64>, after: &ViewTriageState, touched: &[u64]) -> ViewChanges {
        let after_set = after.displayed_set();
        let mut changes = Vec::new();
        for id in before.difference(&after_set) {
            changes.push((*id, TriageDecision::Suppress));
        }
        for id in after_set.difference(before) {
            changes.push((*id, TriageDecision::Display));
        }
        // newly submitted alerts always get an explicit decision
        for id in touched {
            if !changes.iter().any(|(c, _)| c == id) {
                let d = if after_set.contains(id) {
                    TriageDecision::Display
                } else {
                    TriageDecision::Suppress
                };
                changes.push((*id, d));
            }
        }
        changes.sort();
        ViewChanges { changes }
    }

    fn apply<F: FnMut(&mut ViewTriageState, &RuleSet, &BTreeMap<u64, Alert>)>(
        &mut self,
        touched: &[u64],
        mut f: F,
    ) -> BTreeMap<String, ViewChanges> {
        let mut out = BTreeMap::new();
        for (name, view) in self.views.iter_mut() {
            let before = view.displayed_set();
            f(view, &self.rules, &self.live);
            out.insert(name.clone(), Self::diff(&before, view, touched));
        }
        out
    }

    pub fn submit_alert(
        &mut self,
        alert: Alert,
    ) -> Result<BTreeMap<String, ViewChanges>, TriageError> {
        if self.live.contains_key(&alert.id) {
            return Err(TriageError::DuplicateAlert(alert.id));
        }
        if alert.expires_at.is_some_and(|e| e < alert.raised_at) {
            return Err(TriageError::ExpiresBeforeRaised(alert.id));
        }
        let id = alert.id;
        self.live.insert(id, alert);
        let engine_rules = self.rules.clone();
        Ok(self.apply(&[id], |view, _, live| {
            let a = &live[&id];
            let entry = if a.essential {
                RuleEntry::Essential
            } else {
                engine_rules.entry(&a.alert_type, &view.view)
            };
            view.insert(a, entry);
        }))
    }

    /// Removes a live alert (dismissed by the human or resolved at the source).
    pub fn withdraw(&mut self, id: u64) -> Option<BTreeMap<String, ViewChanges>> {
        let alert = self.live.remove(&id)?;
        Some(self.apply(&[], |view, _, _| view.remove(&alert)))
    }

    /// Drops alerts whose `expires_at` ≤ `now`; suppressed alerts move up.
    pub fn expire(&mut self, now: Millis) -> (Vec<u64>, BTreeMap<String, ViewChanges>) {
        let expired: Vec<Alert> = self
            .live
            .values()
            .filter(|a| a.expires_at.is_some_and(|e| e <= now))
            .cloned()
            .collect();
        if expired.is_empty() {
            return (Vec::new(), BTreeMap::new());
        }
        for a in &expired {
            self.live.remove(&a.id);
        }
        let changes = self.apply(&[], |view, _, _| {
            for a in &expired {
                view.remove(a);
            }
        });
        (expired.into_iter().map(|a| a.id).collect(), changes)
    }

    /// Installs a rule and re-triages the view it names.
    pub fn update_rule(
        &mut self,
        mut rule: AlertRule,
        origin: Initiator,
    ) -> Result<(Option<AlertRule>, BTreeMap<String, ViewChanges>), TriageError> {
        if !rule.is_well_formed() {
            return Err(TriageError::MalformedRule(rule.alert_type, rule.view));
        }
        rule.origin = origin.into();
        let alert_type = rule.alert_type.clone();
        let target_view = rule.view.clone();
        let previous = self.rules.set(rule);
        let changes = self.apply(&[], |view, rules, live| {
            if view.view != target_view {
                return;
            }
            for a in live.values().filter(|a| a.alert_type == alert_type) {
                view.remove(a);
                let entry = if a.essential {
                    RuleEntry::Essential
                } else {
                    rules.entry(&a.alert_type, &view.view)
                };
                view.insert(a, entry);
            }
        });
        Ok((previous, changes))
    }

    /// Machine-origin rule adjustment from operator responsiveness. Demotes
    /// every non-essential rule one level when responses lag, restores one
    /// level toward baseline when they recover. Never both on one snapshot.
    pub fn adapt_frequency(
        &mut self,
        metric: &ResponsivenessMetric,
        cfg: &ResponsivenessConfig,
        at: Millis,
    ) -> Vec<RuleChange> {
        let Some(mean) = metric.mean_response_ms() else {
            return Vec::new();
        };
        let lagging = mean > cfg.lag_ms as f64;
        let recovered = mean < cfg.recovery_ms as f64;
        let mut planned = Vec::new();
        for rule in self.rules.iter() {
            let RuleEntry::Priority(p) = rule.entry else {
                continue;
            };
            let next = if lagging {
                (p + 1).min(MIN_PRIORITY)
            } else if recovered {
                match self.rules.baseline(&rule.alert_type, &rule.view) {
                    Some(RuleEntry::Priority(base)) if p > base => p - 1,
                    _ => p,
                }
            } else {
                p
            };
            if next != p {
                planned.push((rule.clone(), RuleEntry::Priority(next)));
            }
        }
        let mut changes = Vec::new();
        for (rule, entry) in planned {
            let updated = AlertRule {
                entry,
                ..rule.clone()
            };
            self.update_rule(updated, Initiator::Machine)
                .expect("adjusted rule is well formed");
            changes.push(RuleChange {
                alert_type: rule.alert_type,
                view: rule.view,
                previous: Some(rule.entry),
                entry,
                origin: Initiator::Machine,
                at,
            });
        }
        changes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(id: u64, ty: &str, raised_at: Millis) -> Alert {
        Alert {
            id,
            alert_type: ty.into(),
            source: "gcs".into(),
            message: format!("alert {id}"),
            raised_at,
            expires_at: None,
            essential: false,
        }
    }

    fn engine() -> TriageEngine {
        let rules = RuleSet::new([
            AlertRule::priority("p1", "map", 1),
            AlertRule::priority("p2", "map", 2),
            AlertRule::priority("p3", "map", 3),
            AlertRule::priority("p4", "map", 4),
            AlertRule::essential("help", "map"),
        ]);
        let mut e = TriageEngine::new(rules);
        e.register_view("map", 3).unwrap();
        e
    }

    #[test]
    fn register_and_deregister() {
        let mut e = TriageEngine::default();
        let v = e.register_view("map", 3).unwrap();
        assert!(v.displayed().is_empty() && v.max_threshold == 3);
        assert_eq!(
            e.register_view("map", 3).unwrap_err(),
            TriageError::DuplicateView("map".into())
        );
        assert!(e.deregister_view("tracking").is_err());
        e.submit_alert(alert(1, "x", 0)).unwrap();
        e.deregister_view("map").unwrap();
        e.withdraw(1);
        assert!(e.register_view("map", 3).unwrap().displayed().is_empty());
    }

    #[test]
    fn lower_priority_suppressed_when_full() {
        let mut e = engine();
        for (i, ty) in ["p1", "p2", "p3"].iter().enumerate() {
            e.submit_alert(alert(i as u64 + 1, ty, i as u64)).unwrap();
        }
        let out = e.submit_alert(alert(4, "p4", 10)).unwrap();
        assert_eq!(out["map"].changes, vec![(4, TriageDecision::Suppress)]);
        assert_eq!(e.view("map").unwrap().displayed(), vec![1, 2, 3]);
    }

    #[test]
    fn higher_priority_displaces() {
        let mut e = engine();
        for (i, ty) in ["p1", "p2", "p3"].iter().enumerate() {
            e.submit_alert(alert(i as u64 + 1, ty, i as u64)).unwrap();
        }
        let out = e.submit_alert(alert(4, "p1", 10)).unwrap();
        assert_eq!(
            out["map"].changes,
            vec![(3, TriageDecision::Suppress), (4, TriageDecision::Display)]
        );
        assert_eq!(e.view("map").unwrap().suppressed(), vec![3]);
    }

    #[test]
    fn essential_ignores_zero_threshold() {
        let mut e = TriageEngine::new(RuleSet::new([AlertRule::essential("help", "map")]));
        e.register_view("map", 0).unwrap();
        let out = e.submit_alert(alert(1, "help", 0)).unwrap();
        assert_eq!(out["map"].changes, vec![(1, TriageDecision::Display)]);
        e.submit_alert(alert(2, "other", 0)).unwrap();
        assert_eq!(e.view("map").unwrap().displayed(), vec![1]);
    }

    #[test]
    fn unknown_type_defaults_to_priority_three() {
        let e = engine();
        assert_eq!(e.rules().entry("mystery", "map"), RuleEntry::Priority(3));
    }

    #[test]
    fn expiry_promotes() {
        let mut e = engine();
        let mut a = alert(1, "p2", 0);
        a.expires_at = Some(100);
        e.submit_alert(a).unwrap();
        e.submit_alert(alert(2, "p1", 1)).unwrap();
        e.submit_alert(alert(3, "p1", 2)).unwrap();
        e.submit_alert(alert(4, "p3", 3)).unwrap();
        assert_eq!(e.view("map").unwrap().suppressed(), vec![4]);
        let (gone, changes) = e.expire(50);
        assert!(gone.is_empty() && changes.is_empty());
        let (gone, changes) = e.expire(100);
        assert_eq!(gone, vec![1]);
        assert_eq!(
            changes["map"].changes,
            vec![(1, TriageDecision::Suppress), (4, TriageDecision::Display)]
        );
    }

    #[test]
    fn demote_and_promote_rules() {
        let mut e = engine();
        for i in 0..3 {
            e.submit_alert(alert(i + 1, "p1", i)).unwrap();
        }
        e.submit_alert(alert(10, "help", 5)).unwrap();
        e.update_rule(AlertRule::priority("help", "map", 5), Initiator::Human)
            .unwrap();
        assert_eq!(e.view("map").unwrap().suppressed(), vec![10]);
        e.update_rule(AlertRule::essential("help", "map"), Initiator::Human)
            .unwrap();
        assert!(e.view("map").unwrap().displayed().contains(&10));
    }

    #[test]
    fn forced_essential_alert_cannot_be_demoted() {
        let mut e = engine();
        let mut a = alert(1, "p4", 0);
        a.essential = true;
        e.submit_alert(a).unwrap();
        e.update_rule(AlertRule::priority("p4", "map", 5), Initiator::Machine)
            .unwrap();
        assert_eq!(e.view("map").unwrap().essential_ids(), vec![1]);
    }

    #[test]
    fn frequency_adaptation_demotes_and_restores() {
        let mut e = engine();
        let cfg = ResponsivenessConfig::default();
        let mut slow = ResponsivenessMetric::new(cfg.window);
        slow.record_answered(0, 9_000);
        let changes = e.adapt_frequency(&slow, &cfg, 10);
        assert_eq!(e.rules().entry("p2", "map"), RuleEntry::Priority(3));
        assert_eq!(e.rules().entry("p4", "map"), RuleEntry::Priority(5));
        assert_eq!(e.rules().entry("help", "map"), RuleEntry::Essential);
        assert!(changes
            .iter()
            .all(|c| c.origin == Initiator::Machine && c.alert_type != "help"));
        let mut fast = ResponsivenessMetric::new(cfg.window);
        fast.record_answered(0, 1_000);
        for _ in 0..5 {
            e.adapt_frequency(&fast, &cfg, 20);
        }
        for (ty, p) in [("p1", 1), ("p2", 2), ("p3", 3), ("p4", 4)] {
            assert_eq!(e.rules().entry(ty, "map"), RuleEntry::Priority(p));
        }
    }
}
