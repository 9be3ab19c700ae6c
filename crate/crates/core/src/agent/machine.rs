//! Flat task state machines as carried by mission fragments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub event: String,
    pub to: String,
}

impl Transition {
    pub fn new(from: &str, event: &str, to: &str) -> Self {
        Transition {
            from: from.into(),
            event: event.into(),
            to: to.into(),
        }
    }
}

/// File form of a machine: no current state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("machine has no transitions")]
    EmptyTransitions,
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("initial state `{0}` is not declared")]
    UnknownInitial(String),
    #[error("transitions reference undeclared states: {0:?}")]
    UndeclaredStates(Vec<String>),
    #[error("event `{event}` from `{from}` leads to more than one state")]
    Ambiguous { from: String, event: String },
    #[error("states without onboard behavior: {0:?}")]
    UnknownStates(Vec<String>),
    #[error("unknown events: {0:?}")]
    UnknownEvents(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStateMachine {
    states: BTreeSet<String>,
    transitions: Vec<Transition>,
    initial: String,
    current: String,
}

impl TaskStateMachine {
    pub fn new(spec: &MachineSpec) -> Result<Self, MachineError> {
        if spec.transitions.is_empty() {
            return Err(MachineError::EmptyTransitions);
        }
        let mut states = BTreeSet::new();
        for s in &spec.states {
            if !states.insert(s.clone()) {
                return Err(MachineError::DuplicateState(s.clone()));
            }
        }
        if !states.contains(&spec.initial) {
            return Err(MachineError::UnknownInitial(spec.initial.clone()));
        }
        let undeclared: BTreeSet<String> = spec
            .transitions
            .iter()
            .flat_map(|t| [&t.from, &t.to])
            .filter(|s| !states.contains(*s))
            .cloned()
            .collect();
        if !undeclared.is_empty() {
            return Err(MachineError::UndeclaredStates(
                undeclared.into_iter().collect(),
            ));
        }
        let mut seen = BTreeMap::new();
        for t in &spec.transitions {
            if let Some(prev) = seen.insert((&t.from, &t.event), &t.to) {
                if prev != &t.to {
                    return Err(MachineError::Ambiguous {
                        from: t.from.clone(),
                        event: t.event.clone(),
                    });
                }
            }
        }
        let mut transitions = spec.transitions.clone();
        transitions.sort();
        transitions.dedup();
        Ok(TaskStateMachine {
            states,
            transitions,
            initial: spec.initial.clone(),
            current: spec.initial.clone(),
        })
    }

    pub fn states(&self) -> &BTreeSet<String> {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn current(&self) -> &str {
        &self.current
    }

    pub fn target(&self, event: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.from == self.current && t.event == event)
            .map(|t| t.to.as_str())
    }

    pub fn can_fire(&self, event: &str) -> bool {
        self.target(event).is_some()
    }

    /// Fires `event` from the current state. `None` if no transition exists.
    pub fn fire(&mut self, event: &str) -> Option<Transition> {
        let to = self.target(event)?.to_string();
        let t = Transition {
            from: std::mem::replace(&mut self.current, to.clone()),
            event: event.into(),
            to,
        };
        Some(t)
    }

    pub fn reset(&mut self) {
        self.current = self.initial.clone();
    }

    /// States no path from `initial` reaches.
    pub fn unreachable_states(&self) -> Vec<String> {
        let mut seen = BTreeSet::from([self.initial.clone()]);
        let mut queue = VecDeque::from([self.initial.as_str()]);
        while let Some(s) = queue.pop_front() {
            for t in self.transitions.iter().filter(|t| t.from == s) {
                if seen.insert(t.to.clone()) {
                    queue.push_back(&t.to);
                }
            }
        }
        self.states
            .iter()
            .filter(|s| !seen.contains(*s))
            .cloned()
            .collect()
    }

    pub fn spec(&self) -> MachineSpec {
        MachineSpec {
            states: self.states.iter().cloned().collect(),
            transitions: self.transitions.clone(),
            initial: self.initial.clone(),
        }
    }
}

/// The states the onboard pilot knows how to fly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Standby,
    Takeoff,
    Searching,
    Surveillance,
    VictimDetected,
    Tracking,
    Delivery,
    Rtl,
    Land,
}

impl StateKind {
    pub const ALL: [StateKind; 9] = [
        StateKind::Standby,
        StateKind::Takeoff,
        StateKind::Searching,
        StateKind::Surveillance,
        StateKind::VictimDetected,
        StateKind::Tracking,
        StateKind::Delivery,
        StateKind::Rtl,
        StateKind::Land,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Standby => "standby",
            StateKind::Takeoff => "takeoff",
            StateKind::Searching => "searching",
            StateKind::Surveillance => "surveillance",
            StateKind::VictimDetected => "victim_detected",
            StateKind::Tracking => "tracking",
            StateKind::Delivery => "delivery",
            StateKind::Rtl => "rtl",
            StateKind::Land => "land",
        }
    }

    pub fn camera_on(self) -> bool {
        matches!(
            self,
            StateKind::Searching
                | StateKind::Surveillance
                | StateKind::VictimDetected
                | StateKind::Tracking
                | StateKind::Delivery
        )
    }

    pub fn airborne(self) -> bool {
        !matches!(self, StateKind::Standby | StateKind::Land)
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Events the onboard pilot can raise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskEvent {
    Launch,
    Dispatch,
    AltitudeReached,
    VictimSighted,
    HelpRequested,
    Confirmed,
    Refuted,
    NoResponse,
    TrackComplete,
    Delivered,
    RouteComplete,
    ReturnHome,
    HomeReached,
}

impl TaskEvent {
    pub const ALL: [TaskEvent; 13] = [
        TaskEvent::Launch,
        TaskEvent::Dispatch,
        TaskEvent::AltitudeReached,
        TaskEvent::VictimSighted,
        TaskEvent::HelpRequested,
        TaskEvent::Confirmed,
        TaskEvent::Refuted,
        TaskEvent::NoResponse,
        TaskEvent::TrackComplete,
        TaskEvent::Delivered,
        TaskEvent::RouteComplete,
        TaskEvent::ReturnHome,
        TaskEvent::HomeReached,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskEvent::Launch => "launch",
            TaskEvent::Dispatch => "dispatch",
            TaskEvent::AltitudeReached => "altitude_reached",
            TaskEvent::VictimSighted => "victim_sighted",
            TaskEvent::HelpRequested => "help_requested",
            TaskEvent::Confirmed => "confirmed",
            TaskEvent::Refuted => "refuted",
            TaskEvent::NoResponse => "no_response",
            TaskEvent::TrackComplete => "track_complete",
            TaskEvent::Delivered => "delivered",
            TaskEvent::RouteComplete => "route_complete",
            TaskEvent::ReturnHome => "return_home",
            TaskEvent::HomeReached => "home_reached",
        }
    }
}

impl FromStr for TaskEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskEvent::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Structural check plus the onboard vocabulary check.
pub fn validate_onboard(spec: &MachineSpec) -> Result<TaskStateMachine, MachineError> {
    let machine = TaskStateMachine::new(spec)?;
    let unknown_states: Vec<String> = machine
        .states()
        .iter()
        .filter(|s| s.parse::<StateKind>().is_err())
        .cloned()
        .collect();
    if !unknown_states.is_empty() {
        return Err(MachineError::UnknownStates(unknown_states));
    }
    let unknown_events: BTreeSet<String> = machine
        .transitions()
        .iter()
        .filter(|t| t.event.parse::<TaskEvent>().is_err())
        .map(|t| t.event.clone())
        .collect();
    if !unknown_events.is_empty() {
        return Err(MachineError::UnknownEvents(
            unknown_events.into_iter().collect(),
        ));
    }
    Ok(machine)
}

/// The search-role machine used by the reference missions.
pub fn search_machine() -> MachineSpec {
    let t = Transition::new;
    MachineSpec {
        states: [
            "standby",
            "takeoff",
            "searching",
            "victim_detected",
            "tracking",
            "rtl",
            "land",
        ]
        .map(String::from)
        .to_vec(),
        transitions: vec![
            t("standby", "launch", "takeoff"),
            t("standby", "return_home", "land"),
            t("takeoff", "altitude_reached", "searching"),
            t("takeoff", "return_home", "rtl"),
            t("searching", "victim_sighted", "tracking"),
            t("searching", "help_requested", "victim_detected"),
            t("searching", "route_complete", "rtl"),
            t("searching", "return_home", "rtl"),
            t("victim_detected", "confirmed", "tracking"),
            t("victim_detected", "refuted", "searching"),
            t("victim_detected", "victim_sighted", "tracking"),
            t("victim_detected", "no_response", "searching"),
            t("victim_detected", "return_home", "rtl"),
            t("tracking", "track_complete", "searching"),
            t("tracking", "return_home", "rtl"),
            t("rtl", "home_reached", "land"),
        ],
        initial: "standby".into(),
    }
}

pub fn surveillance_machine() -> MachineSpec {
    let t = Transition::new;
    MachineSpec {
        states: ["standby", "takeoff", "surveillance", "rtl", "land"]
            .map(String::from)
            .to_vec(),
        transitions: vec![
            t("standby", "launch", "takeoff"),
            t("standby", "return_home", "land"),
            t("takeoff", "altitude_reached", "surveillance"),
            t("takeoff", "return_home", "rtl"),
            t("surveillance", "route_complete", "rtl"),
            t("surveillance", "return_home", "rtl"),
            t("rtl", "home_reached", "land"),
        ],
        initial: "standby".into(),
    }
}

pub fn delivery_machine() -> MachineSpec {
    let t = Transition::new;
    MachineSpec {
        states: ["standby", "takeoff", "delivery", "rtl", "land"]
            .map(String::from)
            .to_vec(),
        transitions: vec![
            t("standby", "dispatch", "takeoff"),
            t("standby", "return_home", "land"),
            t("takeoff", "altitude_reached", "delivery"),
            t("takeoff", "return_home", "rtl"),
            t("delivery", "delivered", "rtl"),
            t("delivery", "return_home", "rtl"),
            t("rtl", "home_reached", "land"),
        ],
        initial: "standby".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_mission_starts_in_standby() {
        let m = validate_onboard(&search_machine()).unwrap();
        assert_eq!(m.current(), "standby");
        assert!(m.unreachable_states().is_empty());
    }

    #[test]
    fn empty_transitions_rejected() {
        let spec = MachineSpec {
            states: vec!["standby".into()],
            transitions: vec![],
            initial: "standby".into(),
        };
        assert_eq!(
            TaskStateMachine::new(&spec),
            Err(MachineError::EmptyTransitions)
        );
    }

    #[test]
    fn undeclared_targets_listed() {
        let mut spec = search_machine();
        spec.transitions
            .push(Transition::new("land", "launch", "orbit"));
        spec.transitions
            .push(Transition::new("limbo", "launch", "land"));
        assert_eq!(
            TaskStateMachine::new(&spec),
            Err(MachineError::UndeclaredStates(vec![
                "limbo".into(),
                "orbit".into()
            ]))
        );
    }

    #[test]
    fn vocabulary_enforced() {
        let mut spec = search_machine();
        spec.transitions
            .push(Transition::new("land", "teleport", "standby"));
        assert_eq!(
            validate_onboard(&spec),
            Err(MachineError::UnknownEvents(vec!["teleport".into()]))
        );
    }

    #[test]
    fn fire_follows_transitions() {
        let mut m = TaskStateMachine::new(&search_machine()).unwrap();
        assert!(m.fire("altitude_reached").is_none());
        let t = m.fire("launch").unwrap();
        assert_eq!((t.from.as_str(), t.to.as_str()), ("standby", "takeoff"));
        assert_eq!(m.current(), "takeoff");
    }

    #[test]
    fn unreachable_state_reported() {
        let mut spec = delivery_machine();
        spec.states.push("surveillance".into());
        spec.transitions
            .push(Transition::new("surveillance", "return_home", "rtl"));
        let m = validate_onboard(&spec).unwrap();
        assert_eq!(m.unreachable_states(), vec!["surveillance".to_string()]);
    }
}
