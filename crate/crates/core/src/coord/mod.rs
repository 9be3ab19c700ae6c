//! Human-machine coordination: help-request sessions, affordances for
//! human-initiated actions, and tug-of-war mitigation.

mod affordance;
mod directive;
mod session;
mod tug;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use affordance::{is_hard_safety_state, AffordanceSet, AffordanceTable};
pub use directive::{Decision, DirectiveAction, DirectiveKind, HumanDirective};
pub use session::{CoordinationSession, SessionState, SessionStore, DEFAULT_WAITING_PERIOD_MS};
pub use tug::{
    longest_alternation, ActionLog, ActionLogEntry, Conflict, DEFAULT_TUG_K, DEFAULT_TUG_WINDOW_MS,
};

use crate::adaptation::Initiator;
use crate::agent::DetectionEvent;
use crate::bus::Millis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordError {
    #[error("detection {detection_id} of `{uav}` already has session {existing}")]
    DuplicateSession {
        uav: String,
        detection_id: u64,
        existing: u64,
    },
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("session {session} is already {state:?}")]
    SessionClosed { session: u64, state: SessionState },
    #[error("response to session {session} at {at} is past its deadline {deadline}")]
    LateResponse {
        session: u64,
        deadline: Millis,
        at: Millis,
    },
    #[error("action for `{uav}` at {at} precedes last action at {last}")]
    OutOfOrderAction {
        uav: String,
        at: Millis,
        last: Millis,
    },
    #[error("autonomy of `{0}` can only be restored by a human")]
    MachineRestore(String),
    #[error("autonomy of `{0}` is not curtailed")]
    NotCurtailed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordParams {
    pub waiting_period_ms: Millis,
    pub tug_k: usize,
    pub tug_window_ms: Millis,
}

impl Default for CoordParams {
    fn default() -> Self {
        CoordParams {
            waiting_period_ms: DEFAULT_WAITING_PERIOD_MS,
            tug_k: DEFAULT_TUG_K,
            tug_window_ms: DEFAULT_TUG_WINDOW_MS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curtailment {
    pub reason: String,
    pub since: Millis,
}

/// Per-UAV, per-dimension autonomy. Absent means full autonomy.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutonomyStatus {
    curtailed: BTreeMap<String, BTreeMap<String, Curtailment>>,
}

impl AutonomyStatus {
    pub fn is_curtailed(&self, uav: &str, dimension: &str) -> bool {
        self.curtailed
            .get(uav)
            .is_some_and(|m| m.contains_key(dimension))
    }

    pub fn any_curtailed(&self, uav: &str) -> bool {
        self.curtailed.get(uav).is_some_and(|m| !m.is_empty())
    }

    pub fn curtailments(&self, uav: &str) -> Option<&BTreeMap<String, Curtailment>> {
        self.curtailed.get(uav)
    }

    pub fn all(&self) -> &BTreeMap<String, BTreeMap<String, Curtailment>> {
        &self.curtailed
    }
}

/// The coordination service state. Single writer; `resolve` and `tick` are
/// serialized by the caller in time order (ties go to the human response).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinator {
    pub params: CoordParams,
    sessions: SessionStore,
    actions: ActionLog,
    autonomy: AutonomyStatus,
    #[serde(skip)]
    table: AffordanceTable,
}

impl Coordinator {
    pub fn new(params: CoordParams) -> Self {
        Coordinator {
            params,
            sessions: SessionStore::new(),
            actions: ActionLog::default(),
            autonomy: AutonomyStatus::default(),
            table: AffordanceTable::standard(),
        }
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn actions(&self) -> &ActionLog {
        &self.actions
    }

    pub fn autonomy(&self) -> &AutonomyStatus {
        &self.autonomy
    }

    pub fn open_session(
        &mut self,
        uav: &str,
        detection_id: u64,
        detection: DetectionEvent,
        at: Millis,
    ) -> Result<CoordinationSession, CoordError> {
        self.sessions
            .open(
                uav,
                detection_id,
                detection,
                self.params.waiting_period_ms,
                at,
            )
            .cloned()
    }

    pub fn resolve(
        &mut self,
        session: u64,
        decision: Decision,
        at: Millis,
    ) -> Result<CoordinationSession, CoordError> {
        self.sessions.resolve(session, decision, at)
    }

    /// Timeouts due strictly before `now`, or at `now` when `inclusive`.
    pub fn tick(&mut self, now: Millis, inclusive: bool) -> Vec<CoordinationSession> {
        self.sessions.expire(now, inclusive)
    }

    pub fn compute_affordances(&self, uav: &str, state: &str) -> AffordanceSet {
        self.table.compute(
            state,
            self.sessions.has_open_for(uav),
            self.autonomy.any_curtailed(uav),
        )
    }

    /// Records an action and reports a newly detected conflict on a dimension
    /// that is not already curtailed.
    pub fn record_action(&mut self, e: ActionLogEntry) -> Result<Option<Conflict>, CoordError> {
        let (uav, dim, at) = (e.uav.clone(), e.dimension.clone(), e.at);
        self.actions.record(e)?;
        if self.autonomy.is_curtailed(&uav, &dim) {
            return Ok(None);
        }
        Ok(self
            .actions
            .detect_tug_of_war(&uav, at, self.params.tug_window_ms, self.params.tug_k)
            .filter(|c| !self.autonomy.is_curtailed(&c.uav, &c.dimension)))
    }

    pub fn detect_tug_of_war(&self, uav: &str, now: Millis) -> Option<Conflict> {
        self.actions
            .detect_tug_of_war(uav, now, self.params.tug_window_ms, self.params.tug_k)
    }

    pub fn break_cycle(&mut self, conflict: &Conflict) -> Curtailment {
        let c = Curtailment {
            reason: format!(
                "tug-of-war on {} ({} alternations)",
                conflict.dimension, conflict.alternations
            ),
            since: conflict.at,
        };
        self.autonomy
            .curtailed
            .entry(conflict.uav.clone())
            .or_default()
            .insert(conflict.dimension.clone(), c.clone());
        self.actions.reset_epoch(&conflict.uav, &conflict.dimension);
        c
    }

    /// Restores one dimension, or all of them when `dimension` is `None`.
    /// Returns the dimensions restored.
    pub fn restore_autonomy(
        &mut self,
        uav: &str,
        dimension: Option<&str>,
        actor: Initiator,
    ) -> Result<Vec<String>, CoordError> {
        if actor == Initiator::Machine {
            return Err(CoordError::MachineRestore(uav.into()));
        }
        let map = self
            .autonomy
            .curtailed
            .get_mut(uav)
            .ok_or_else(|| CoordError::NotCurtailed(uav.into()))?;
        let restored: Vec<String> = match dimension {
            Some(d) => map
                .remove(d)
                .map(|_| vec![d.to_string()])
                .unwrap_or_default(),
            None => std::mem::take(map).into_keys().collect(),
        };
        if map.is_empty() {
            self.autonomy.curtailed.remove(uav);
        }
        if restored.is_empty() {
            return Err(CoordError::NotCurtailed(uav.into()));
        }
        for d in &restored {
            self.actions.reset_epoch(uav, d);
        }
        Ok(restored)
    }
}

impl Default for Coordinator {
    fn default() -> Self {
        Coordinator::new(CoordParams::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::Direction;

    fn act(actor: Initiator, direction: Direction, at: Millis) -> ActionLogEntry {
        ActionLogEntry {
            actor,
            uav: "red".into(),
            dimension: "altitude".into(),
            direction,
            at,
            failsafe: false,
        }
    }

    #[test]
    fn conflict_curtails_and_human_restores() {
        let mut c = Coordinator::default();
        let mut conflict = None;
        for (i, t) in [0, 5_000, 10_000, 15_000].into_iter().enumerate() {
            let e = if i % 2 == 0 {
                act(Initiator::Machine, Direction::Decrease, t)
            } else {
                act(Initiator::Human, Direction::Increase, t)
            };
            conflict = c.record_action(e).unwrap().or(conflict);
        }
        let conflict = conflict.expect("conflict");
        c.break_cycle(&conflict);
        assert!(c.autonomy().is_curtailed("red", "altitude"));
        let a = c.compute_affordances("red", "searching");
        assert!(a.allows(DirectiveKind::RestoreAutonomy) && !a.allows(DirectiveKind::GoalUpdate));
        // further actions on a curtailed dimension do not re-raise
        assert!(c
            .record_action(act(Initiator::Human, Direction::Increase, 16_000))
            .unwrap()
            .is_none());
        assert_eq!(
            c.restore_autonomy("red", None, Initiator::Machine),
            Err(CoordError::MachineRestore("red".into()))
        );
        assert_eq!(
            c.restore_autonomy("red", None, Initiator::Human).unwrap(),
            vec!["altitude".to_string()]
        );
        assert!(!c.autonomy().any_curtailed("red"));
    }

    #[test]
    fn restore_without_curtailment_errors() {
        let mut c = Coordinator::default();
        assert!(matches!(
            c.restore_autonomy("red", None, Initiator::Human),
            Err(CoordError::NotCurtailed(_))
        ));
    }
}
