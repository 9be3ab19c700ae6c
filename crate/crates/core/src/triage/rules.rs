use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adaptation::Initiator;

pub const DEFAULT_PRIORITY: u8 = 3;
pub const MIN_PRIORITY: u8 = 5;

/// One view's treatment of an alert type. Priority 1 is the highest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleEntry {
    Essential,
    Priority(u8),
}

impl RuleEntry {
    pub fn is_essential(self) -> bool {
        self == RuleEntry::Essential
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleOrigin {
    Config,
    Human,
    Machine,
}

impl From<Initiator> for RuleOrigin {
    fn from(i: Initiator) -> Self {
        match i {
            Initiator::Human => RuleOrigin::Human,
            Initiator::Machine => RuleOrigin::Machine,
        }
    }
}

/// Wire/file form: `{alert_type, view, essential: true}` or `{alert_type, view, priority: n}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct RawRule {
    alert_type: String,
    view: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    essential: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<u8>,
    #[serde(default = "config_origin")]
    origin: RuleOrigin,
}

fn config_origin() -> RuleOrigin {
    RuleOrigin::Config
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct AlertRule {
    pub alert_type: String,
    pub view: String,
    pub entry: RuleEntry,
    pub origin: RuleOrigin,
}

impl AlertRule {
    pub fn essential(alert_type: &str, view: &str) -> Self {
        AlertRule {
            alert_type: alert_type.into(),
            view: view.into(),
            entry: RuleEntry::Essential,
            origin: RuleOrigin::Config,
        }
    }

    pub fn priority(alert_type: &str, view: &str, p: u8) -> Self {
        AlertRule {
            alert_type: alert_type.into(),
            view: view.into(),
            entry: RuleEntry::Priority(p),
            origin: RuleOrigin::Config,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match self.entry {
            RuleEntry::Essential => true,
            RuleEntry::Priority(p) => (1..=MIN_PRIORITY).contains(&p),
        }
    }
}

impl TryFrom<RawRule> for AlertRule {
    type Error = String;

    fn try_from(r: RawRule) -> Result<Self, Self::Error> {
        let entry = match (r.essential, r.priority) {
            (Some(true), None) => RuleEntry::Essential,
            (Some(false) | None, Some(p)) if (1..=MIN_PRIORITY).contains(&p) => {
                RuleEntry::Priority(p)
            }
            (_, Some(p)) if !(1..=MIN_PRIORITY).contains(&p) => {
                return Err(format!("priority {p} outside 1..=5"))
            }
            _ => {
                return Err(format!(
                    "rule {}/{} needs exactly one of essential or priority",
                    r.alert_type, r.view
                ))
            }
        };
        Ok(AlertRule {
            alert_type: r.alert_type,
            view: r.view,
            entry,
            origin: r.origin,
        })
    }
}

impl From<AlertRule> for RawRule {
    fn from(r: AlertRule) -> Self {
        let (essential, priority) = match r.entry {
            RuleEntry::Essential => (Some(true), None),
            RuleEntry::Priority(p) => (None, Some(p)),
        };
        RawRule {
            alert_type: r.alert_type,
            view: r.view,
            essential,
            priority,
            origin: r.origin,
        }
    }
}

/// Current rules plus the baseline machine adjustments return to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    // alert_type → view → rule
    rules: BTreeMap<String, BTreeMap<String, AlertRule>>,
    baseline: BTreeMap<String, BTreeMap<String, RuleEntry>>,
}

impl RuleSet {
    pub fn new(rules: impl IntoIterator<Item = AlertRule>) -> Self {
        let mut set = RuleSet::default();
        for r in rules {
            set.set(r);
        }
        set
    }

    /// Falls back to priority 3 for types without a rule in this view.
    pub fn entry(&self, alert_type: &str, view: &str) -> RuleEntry {
        self.get(alert_type, view)
            .map_or(RuleEntry::Priority(DEFAULT_PRIORITY), |r| r.entry)
    }

    pub fn get(&self, alert_type: &str, view: &str) -> Option<&AlertRule> {
        self.rules.get(alert_type).and_then(|m| m.get(view))
    }

    pub fn baseline(&self, alert_type: &str, view: &str) -> Option<RuleEntry> {
        self.baseline
            .get(alert_type)
            .and_then(|m| m.get(view))
            .copied()
    }

    /// Installs a rule. Config and human rules also move the baseline.
    pub fn set(&mut self, rule: AlertRule) -> Option<AlertRule> {
        if rule.origin != RuleOrigin::Machine {
            self.baseline
                .entry(rule.alert_type.clone())
                .or_default()
                .insert(rule.view.clone(), rule.entry);
        }
        self.rules
            .entry(rule.alert_type.clone())
            .or_default()
            .insert(rule.view.clone(), rule)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AlertRule> {
        self.rules.values().flat_map(|m| m.values())
    }
}
