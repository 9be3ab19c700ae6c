//! Self-adaptation records emitted by UAVs and the control actions they carry.

use serde::{Deserialize, Serialize};

use crate::bus::Millis;

/// A UAV's identity: short name plus its display color.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UavId {
    pub name: String,
    pub color: String,
}

impl UavId {
    pub fn new(name: &str, color: &str) -> Self {
        UavId {
            name: name.into(),
            color: color.into(),
        }
    }

    /// Color as shown to the operator (`blue` → `Blue`).
    pub fn display_color(&self) -> String {
        let mut chars = self.color.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => self.name.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    External,
    Internal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    Human,
    Machine,
}

/// Direction of a control action. Numeric axes compare by sign, categorical
/// axes by setting or clearing the same value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "sense", content = "value", rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Set(String),
    Unset(String),
}

impl Direction {
    pub fn opposes(&self, other: &Direction) -> bool {
        match (self, other) {
            (Direction::Increase, Direction::Decrease)
            | (Direction::Decrease, Direction::Increase) => true,
            (Direction::Set(a), Direction::Unset(b)) | (Direction::Unset(a), Direction::Set(b)) => {
                a == b
            }
            _ => false,
        }
    }

    pub fn of_delta(delta: f64) -> Option<Direction> {
        if delta > 0.0 {
            Some(Direction::Increase)
        } else if delta < 0.0 {
            Some(Direction::Decrease)
        } else {
            None
        }
    }
}

pub const ALTITUDE: &str = "altitude";
pub const MODE: &str = "mode";

/// The control effect of an adaptation, if it moved a control axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlChange {
    pub dimension: String,
    pub direction: Direction,
    #[serde(default)]
    pub failsafe: bool,
}

/// One self-adaptation. The snippet fields that must be present depend on
/// `(trigger, initiator)`; the constructors below only build complete events,
/// but events arriving off the wire are checked again by the explanation engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    pub uav: UavId,
    pub trigger: Trigger,
    pub initiator: Initiator,
    pub event_snippet: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_changes_snippet: Option<String>,
    pub rationale_snippet: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause_snippet: Option<String>,
    pub at: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlChange>,
}

impl AdaptationEvent {
    fn base(
        uav: &UavId,
        trigger: Trigger,
        initiator: Initiator,
        event: &str,
        rationale: &str,
        at: Millis,
    ) -> Self {
        AdaptationEvent {
            uav: uav.clone(),
            trigger,
            initiator,
            event_snippet: event.into(),
            action_snippet: None,
            desired_changes_snippet: None,
            rationale_snippet: rationale.into(),
            cause_snippet: None,
            at,
            control: None,
        }
    }

    pub fn external_machine(
        uav: &UavId,
        event: &str,
        action: &str,
        rationale: &str,
        at: Millis,
    ) -> Self {
        AdaptationEvent {
            action_snippet: Some(action.into()),
            ..Self::base(
                uav,
                Trigger::External,
                Initiator::Machine,
                event,
                rationale,
                at,
            )
        }
    }

    pub fn internal_machine(
        uav: &UavId,
        event: &str,
        action: &str,
        rationale: &str,
        at: Millis,
    ) -> Self {
        AdaptationEvent {
            action_snippet: Some(action.into()),
            ..Self::base(
                uav,
                Trigger::Internal,
                Initiator::Machine,
                event,
                rationale,
                at,
            )
        }
    }

    pub fn external_human(
        uav: &UavId,
        event: &str,
        desired: &str,
        rationale: &str,
        at: Millis,
    ) -> Self {
        AdaptationEvent {
            desired_changes_snippet: Some(desired.into()),
            ..Self::base(
                uav,
                Trigger::External,
                Initiator::Human,
                event,
                rationale,
                at,
            )
        }
    }

    pub fn internal_human(
        uav: &UavId,
        event: &str,
        cause: &str,
        desired: &str,
        rationale: &str,
        at: Millis,
    ) -> Self {
        AdaptationEvent {
            desired_changes_snippet: Some(desired.into()),
            cause_snippet: Some(cause.into()),
            ..Self::base(
                uav,
                Trigger::Internal,
                Initiator::Human,
                event,
                rationale,
                at,
            )
        }
    }

    pub fn with_control(mut self, dimension: &str, direction: Direction, failsafe: bool) -> Self {
        self.control = Some(ControlChange {
            dimension: dimension.into(),
            direction,
            failsafe,
        });
        self
    }

    /// Names of required snippets that are missing.
    pub fn missing_snippets(&self) -> Vec<&'static str> {
        let mut missing = Vec::new();
        match self.initiator {
            Initiator::Machine if self.action_snippet.is_none() => missing.push("Action"),
            Initiator::Human if self.desired_changes_snippet.is_none() => {
                missing.push("Desired Changes")
            }
            _ => {}
        }
        if self.trigger == Trigger::Internal
            && self.initiator == Initiator::Human
            && self.cause_snippet.is_none()
        {
            missing.push("cause");
        }
        missing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_are_complete() {
        let u = UavId::new("b1", "blue");
        let all = [
            AdaptationEvent::external_machine(&u, "e", "a", "r", 0),
            AdaptationEvent::internal_machine(&u, "e", "a", "r", 0),
            AdaptationEvent::external_human(&u, "e", "d", "r", 0),
            AdaptationEvent::internal_human(&u, "e", "c", "d", "r", 0),
        ];
        for e in &all {
            assert!(e.missing_snippets().is_empty(), "{e:?}");
        }
        let mut broken = all[3].clone();
        broken.cause_snippet = None;
        assert_eq!(broken.missing_snippets(), vec!["cause"]);
    }

    #[test]
    fn directions() {
        assert!(Direction::Increase.opposes(&Direction::Decrease));
        assert!(!Direction::Increase.opposes(&Direction::Increase));
        assert!(Direction::Set("manual".into()).opposes(&Direction::Unset("manual".into())));
        assert!(!Direction::Set("manual".into()).opposes(&Direction::Unset("hold".into())));
        assert_eq!(UavId::new("b", "blue").display_color(), "Blue");
    }
}
