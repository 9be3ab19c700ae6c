//! Machine-initiated help requests with a bounded waiting period.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::directive::Decision;
use super::CoordError;
use crate::agent::DetectionEvent;
use crate::bus::Millis;

pub const DEFAULT_WAITING_PERIOD_MS: Millis = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    HelpRequested,
    Confirmed,
    Refuted,
    TimedOut,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        self != SessionState::HelpRequested
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinationSession {
    pub id: u64,
    pub uav: String,
    pub detection_id: u64,
    pub detection: DetectionEvent,
    pub state: SessionState,
    pub waiting_period: Millis,
    pub opened_at: Millis,
    pub closed_at: Option<Millis>,
}

impl CoordinationSession {
    pub fn deadline(&self) -> Millis {
        self.opened_at + self.waiting_period
    }

    pub fn remaining(&self, now: Millis) -> Millis {
        self.deadline().saturating_sub(now)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStore {
    next_id: u64,
    sessions: BTreeMap<u64, CoordinationSession>,
    #[serde(with = "pairs")]
    by_detection: BTreeMap<(String, u64), u64>,
}

/// JSON object keys must be strings, so the (uav, detection) index travels as a list.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<(String, u64), u64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(String, u64), u64>, D::Error> {
        Ok(Vec::<((String, u64), u64)>::deserialize(d)?
            .into_iter()
            .collect())
    }
}

impl SessionStore {
    pub fn new() -> Self {
        SessionStore {
            next_id: 1,
            ..Default::default()
        }
    }

    pub fn get(&self, id: u64) -> Option<&CoordinationSession> {
        self.sessions.get(&id)
    }

    pub fn all(&self) -> impl Iterator<Item = &CoordinationSession> {
        self.sessions.values()
    }

    pub fn open_sessions(&self) -> impl Iterator<Item = &CoordinationSession> {
        self.sessions.values().filter(|s| !s.state.is_terminal())
    }

    pub fn has_open_for(&self, uav: &str) -> bool {
        self.open_sessions().any(|s| s.uav == uav)
    }

    pub fn open(
        &mut self,
        uav: &str,
        detection_id: u64,
        detection: DetectionEvent,
        waiting_period: Millis,
        at: Millis,
    ) -> Result<&CoordinationSession, CoordError> {
        let key = (uav.to_string(), detection_id);
        if let Some(&existing) = self.by_detection.get(&key) {
            return Err(CoordError::DuplicateSession {
                uav: uav.into(),
                detection_id,
                existing,
            });
        }
        let id = self.next_id.max(1);
        self.next_id = id + 1;
        self.by_detection.insert(key, id);
        let session = CoordinationSession {
            id,
            uav: uav.into(),
            detection_id,
            detection,
            state: SessionState::HelpRequested,
            waiting_period,
            opened_at: at,
            closed_at: None,
        };
        Ok(self.sessions.entry(id).or_insert(session))
    }

    /// A human answer. Rejected when the session is already terminal or the
    /// answer arrives after the waiting period.
    pub fn resolve(
        &mut self,
        id: u64,
        decision: Decision,
        at: Millis,
    ) -> Result<CoordinationSession, CoordError> {
        let s = self
            .sessions
            .get_mut(&id)
            .ok_or(CoordError::UnknownSession(id))?;
        if s.state.is_terminal() {
            return Err(CoordError::SessionClosed {
                session: id,
                state: s.state,
            });
        }
        if at > s.deadline() {
            return Err(CoordError::LateResponse {
                session: id,
                deadline: s.deadline(),
                at,
            });
        }
        s.state = match decision {
            Decision::Confirm => SessionState::Confirmed,
            Decision::Reject => SessionState::Refuted,
        };
        s.closed_at = Some(at);
        Ok(s.clone())
    }

    /// Times out sessions whose deadline is before `now` (or at `now` when
    /// `inclusive`). A session closes at its deadline, not at `now`.
    pub fn expire(&mut self, now: Millis, inclusive: bool) -> Vec<CoordinationSession> {
        let mut out = Vec::new();
        for s in self.sessions.values_mut() {
            let due = if inclusive {
                s.deadline() <= now
            } else {
                s.deadline() < now
            };
            if !s.state.is_terminal() && due {
                s.state = SessionState::TimedOut;
                s.closed_at = Some(s.deadline());
                out.push(s.clone());
            }
        }
        out.sort_by_key(|s| (s.deadline(), s.id));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn det() -> DetectionEvent {
        DetectionEvent {
            object_class: "person".into(),
            confidence: 0.9,
            reliability: 0.4,
            location: GeoPoint::new(0.0, 0.0),
            frame: 3,
            uav: "blue".into(),
        }
    }

    #[test]
    fn timeout_closes_at_deadline() {
        let mut s = SessionStore::new();
        let id = s.open("blue", 1, det(), 10_000, 1_234).unwrap().id;
        assert!(s.expire(11_233, true).is_empty());
        let out = s.expire(11_240, true);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].closed_at, Some(11_234));
        assert_eq!(s.get(id).unwrap().state, SessionState::TimedOut);
    }

    #[test]
    fn response_one_tick_before_deadline_wins() {
        let mut s = SessionStore::new();
        let id = s.open("blue", 1, det(), 10_000, 0).unwrap().id;
        let r = s.resolve(id, Decision::Confirm, 9_990).unwrap();
        assert_eq!(r.state, SessionState::Confirmed);
        assert!(s.expire(20_000, true).is_empty());
    }

    #[test]
    fn tie_goes_to_the_human() {
        let mut s = SessionStore::new();
        let id = s.open("blue", 1, det(), 10_000, 0).unwrap().id;
        // strict expiry before processing a response that lands on the deadline
        assert!(s.expire(10_000, false).is_empty());
        assert_eq!(
            s.resolve(id, Decision::Reject, 10_000).unwrap().state,
            SessionState::Refuted
        );
    }

    #[test]
    fn terminal_sessions_reject_answers() {
        let mut s = SessionStore::new();
        let id = s.open("blue", 1, det(), 100, 0).unwrap().id;
        s.expire(100, true);
        assert!(matches!(
            s.resolve(id, Decision::Confirm, 100),
            Err(CoordError::SessionClosed { .. })
        ));
    }

    #[test]
    fn one_session_per_detection() {
        let mut s = SessionStore::new();
        s.open("blue", 1, det(), 100, 0).unwrap();
        assert!(matches!(
            s.open("blue", 1, det(), 100, 5),
            Err(CoordError::DuplicateSession { .. })
        ));
        s.open("red", 1, det(), 100, 5).unwrap();
        assert_eq!(s.open_sessions().count(), 2);
    }
}
