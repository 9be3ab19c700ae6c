//! Which directives the operator may issue to a UAV right now.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::directive::DirectiveKind;
use crate::agent::StateKind;

/// Allowed directive kinds for one UAV at one moment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffordanceSet {
    pub kinds: BTreeSet<DirectiveKind>,
    /// False when the state is not one the table knows (model drift).
    pub known_state: bool,
}

impl AffordanceSet {
    pub fn allows(&self, kind: DirectiveKind) -> bool {
        self.kinds.contains(&kind)
    }
}

/// State → allowed directive kinds, before the session and autonomy overlays.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffordanceTable {
    by_state: BTreeMap<StateKind, BTreeSet<DirectiveKind>>,
}

impl AffordanceTable {
    pub fn standard() -> Self {
        use DirectiveKind::*;
        let airborne_camera = [ReturnToLaunch, AltitudeChange, ManualOverride, VideoRequest];
        let mut by_state = BTreeMap::new();
        by_state.insert(
            StateKind::Standby,
            BTreeSet::from([GoalUpdate, ManualOverride]),
        );
        by_state.insert(
            StateKind::Takeoff,
            BTreeSet::from([ReturnToLaunch, AltitudeChange, ManualOverride]),
        );
        let mut search = BTreeSet::from(airborne_camera);
        search.insert(GoalUpdate);
        by_state.insert(StateKind::Searching, search.clone());
        by_state.insert(StateKind::Surveillance, search);
        by_state.insert(StateKind::VictimDetected, BTreeSet::from(airborne_camera));
        by_state.insert(StateKind::Tracking, BTreeSet::from(airborne_camera));
        by_state.insert(StateKind::Delivery, BTreeSet::from(airborne_camera));
        // camera off to preserve power
        by_state.insert(
            StateKind::Rtl,
            BTreeSet::from([AltitudeChange, ManualOverride]),
        );
        by_state.insert(StateKind::Land, BTreeSet::new());
        AffordanceTable { by_state }
    }

    /// Table lookup plus overlays: confirm/reject only with an open session;
    /// while curtailed, restore is offered and goal updates are withheld.
    pub fn compute(&self, state: &str, open_session: bool, curtailed: bool) -> AffordanceSet {
        let Some(base) = state
            .parse::<StateKind>()
            .ok()
            .and_then(|k| self.by_state.get(&k))
        else {
            return AffordanceSet {
                kinds: BTreeSet::new(),
                known_state: false,
            };
        };
        let mut kinds = base.clone();
        if open_session {
            kinds.insert(DirectiveKind::ConfirmDetection);
            kinds.insert(DirectiveKind::RejectDetection);
        }
        if curtailed {
            kinds.insert(DirectiveKind::RestoreAutonomy);
            kinds.remove(&DirectiveKind::GoalUpdate);
        }
        AffordanceSet {
            kinds,
            known_state: true,
        }
    }
}

impl Default for AffordanceTable {
    fn default() -> Self {
        AffordanceTable::standard()
    }
}

/// States where even RC overrides are refused.
pub fn is_hard_safety_state(state: &str) -> bool {
    state == StateKind::Land.as_str()
}
