use serde::{Deserialize, Serialize};

use crate::bus::Millis;
use crate::geo::GeoPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveKind {
    ConfirmDetection,
    RejectDetection,
    ReturnToLaunch,
    AltitudeChange,
    GoalUpdate,
    ManualOverride,
    RestoreAutonomy,
    VideoRequest,
}

impl DirectiveKind {
    pub const ALL: [DirectiveKind; 8] = [
        DirectiveKind::ConfirmDetection,
        DirectiveKind::RejectDetection,
        DirectiveKind::ReturnToLaunch,
        DirectiveKind::AltitudeChange,
        DirectiveKind::GoalUpdate,
        DirectiveKind::ManualOverride,
        DirectiveKind::RestoreAutonomy,
        DirectiveKind::VideoRequest,
    ];
}

/// Kind plus its parameters; the parameter schema is fixed by the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectiveAction {
    ConfirmDetection {
        session: u64,
    },
    RejectDetection {
        session: u64,
    },
    ReturnToLaunch,
    AltitudeChange {
        delta_m: f64,
    },
    GoalUpdate {
        waypoints: Vec<GeoPoint>,
    },
    ManualOverride {
        engage: bool,
    },
    RestoreAutonomy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dimension: Option<String>,
    },
    VideoRequest,
}

impl DirectiveAction {
    pub fn kind(&self) -> DirectiveKind {
        match self {
            DirectiveAction::ConfirmDetection { .. } => DirectiveKind::ConfirmDetection,
            DirectiveAction::RejectDetection { .. } => DirectiveKind::RejectDetection,
            DirectiveAction::ReturnToLaunch => DirectiveKind::ReturnToLaunch,
            DirectiveAction::AltitudeChange { .. } => DirectiveKind::AltitudeChange,
            DirectiveAction::GoalUpdate { .. } => DirectiveKind::GoalUpdate,
            DirectiveAction::ManualOverride { .. } => DirectiveKind::ManualOverride,
            DirectiveAction::RestoreAutonomy { .. } => DirectiveKind::RestoreAutonomy,
            DirectiveAction::VideoRequest => DirectiveKind::VideoRequest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanDirective {
    pub target: String,
    pub issued_at: Millis,
    #[serde(flatten)]
    pub action: DirectiveAction,
}

impl HumanDirective {
    pub fn new(target: &str, issued_at: Millis, action: DirectiveAction) -> Self {
        HumanDirective {
            target: target.into(),
            issued_at,
            action,
        }
    }

    pub fn kind(&self) -> DirectiveKind {
        self.action.kind()
    }

    /// Hand-held RC commands travel on the critical class.
    pub fn is_rc(&self) -> bool {
        self.kind() == DirectiveKind::ManualOverride
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Confirm,
    Reject,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape_is_flat() {
        let d = HumanDirective::new("red", 5, DirectiveAction::AltitudeChange { delta_m: 3.0 });
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"target": "red", "issued_at": 5, "kind": "altitude_change", "delta_m": 3.0})
        );
        let back: HumanDirective = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        let bad = serde_json::json!({"target": "red", "issued_at": 5, "kind": "altitude_change"});
        assert!(serde_json::from_value::<HumanDirective>(bad).is_err());
    }
}
