//! Message bodies carried on the bus and persisted in the event log.

use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptationEvent, Initiator};
use crate::agent::{DetectionDecision, DetectionEvent, Health, Outcome};
use crate::bus::Millis;
use crate::coord::{Decision, DirectiveKind, HumanDirective};
use crate::explain::Explanation;
use crate::geo::GeoPoint;
use crate::triage::{Alert, AlertRule, RuleEntry, TriageDecision};

pub mod topics {
    pub fn telemetry(uav: &str) -> String {
        format!("uav/{uav}/telemetry")
    }
    pub fn state(uav: &str) -> String {
        format!("uav/{uav}/state")
    }
    pub fn adaptation(uav: &str) -> String {
        format!("uav/{uav}/adaptation")
    }
    pub fn detection(uav: &str) -> String {
        format!("uav/{uav}/detection")
    }
    /// Directives routed from the GCS to one UAV.
    pub fn directive(uav: &str) -> String {
        format!("uav/{uav}/directive")
    }
    pub fn alerts(view: &str) -> String {
        format!("gcs/alerts/{view}")
    }
    pub fn coord(session: u64) -> String {
        format!("gcs/coord/{session}")
    }
    pub const EXPLANATIONS: &str = "gcs/alerts/explanations";
    pub const RULES: &str = "gcs/alerts/rules";
    pub const GCS_LOG: &str = "gcs/log";
    pub const HUMAN_DIRECTIVE: &str = "human/directive";
    pub const HUMAN_RESPONSE: &str = "human/response";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub uav: String,
    pub position: GeoPoint,
    pub altitude: f64,
    pub battery: f64,
    pub health: Health,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub uav: String,
    pub from: String,
    pub event: String,
    pub to: String,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Per-UAV detection counter.
    pub id: u64,
    pub detection: DetectionEvent,
    pub decision: DetectionDecision,
    /// Decided by the UAV alone after the human did not answer.
    #[serde(default)]
    pub reverted: bool,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub uav: String,
    pub capability: String,
    pub score: f64,
    pub outcome: Outcome,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectiveResult {
    pub uav: String,
    pub kind: DirectiveKind,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedDirective {
    pub directive: HumanDirective,
    pub origin: Initiator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutonomyUpdate {
    pub uav: String,
    pub dimension: String,
    pub curtailed: bool,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchOrder {
    pub uav: String,
    pub target: GeoPoint,
    pub at: Millis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionEvent {
    HelpRequested,
    Confirmation,
    Refutation,
    NoResponse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub session: u64,
    pub uav: String,
    pub detection_id: u64,
    pub event: SessionEvent,
    pub at: Millis,
}

/// A console command as sent by the operator console or a scripted human.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsoleCommand {
    pub id: u64,
    /// Version stamp of the frame the command was issued against.
    pub version: u64,
    pub command: CommandBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CommandBody {
    Directive { directive: HumanDirective },
    Resolve { session: u64, decision: Decision },
    DismissAlert { alert: u64 },
    UpdateRule { rule: AlertRule },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandOutcome {
    Accepted,
    Rejected,
    Stale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandResult {
    pub command_id: u64,
    pub outcome: CommandOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriageUpdate {
    pub view: String,
    pub changes: Vec<(u64, TriageDecision)>,
    pub displayed: Vec<u64>,
    pub suppressed: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert: Option<Alert>,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleChange {
    pub alert_type: String,
    pub view: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<RuleEntry>,
    pub entry: RuleEntry,
    pub origin: Initiator,
    pub at: Millis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    HumanFailureToRespond,
    StaleAction,
    ModelDrift,
    TugOfWar,
    Curtailed,
    Restored,
    RejectedRestore,
    MissionStarted,
    MissionPaused,
    MissionResumed,
    MissionAborted,
    RenderFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcsNote {
    pub kind: NoteKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    pub detail: String,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionFooter {
    pub at: Millis,
    pub complete: bool,
    pub aborted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Telemetry(Telemetry),
    StateChange(StateChange),
    Detection(DetectionReport),
    Adaptation(AdaptationEvent),
    Trust(TrustReport),
    DirectiveResult(DirectiveResult),
    Directive(RoutedDirective),
    Autonomy(AutonomyUpdate),
    Dispatch(DispatchOrder),
    Session(SessionMessage),
    Command(ConsoleCommand),
    CommandResult(CommandResult),
    Triage(TriageUpdate),
    RuleChange(RuleChange),
    Explanation(Explanation),
    Note(GcsNote),
    Header(Box<crate::gcs::MissionHeader>),
    Footer(MissionFooter),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Telemetry(_) => "telemetry",
            Payload::StateChange(_) => "state_change",
            Payload::Detection(_) => "detection",
            Payload::Adaptation(_) => "adaptation",
            Payload::Trust(_) => "trust",
            Payload::DirectiveResult(_) => "directive_result",
            Payload::Directive(_) => "directive",
            Payload::Autonomy(_) => "autonomy",
            Payload::Dispatch(_) => "dispatch",
            Payload::Session(_) => "session",
            Payload::Command(_) => "command",
            Payload::CommandResult(_) => "command_result",
            Payload::Triage(_) => "triage",
            Payload::RuleChange(_) => "rule_change",
            Payload::Explanation(_) => "explanation",
            Payload::Note(_) => "note",
            Payload::Header(_) => "header",
            Payload::Footer(_) => "footer",
        }
    }
}

/// What an actor wants published; the driver stamps sender, seq and time.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub topic: String,
    pub qos: crate::bus::QosClass,
    pub payload: Payload,
}

impl Outgoing {
    pub fn standard(topic: impl Into<String>, payload: Payload) -> Self {
        Outgoing {
            topic: topic.into(),
            qos: crate::bus::QosClass::Standard,
            payload,
        }
    }

    pub fn critical(topic: impl Into<String>, payload: Payload) -> Self {
        Outgoing {
            topic: topic.into(),
            qos: crate::bus::QosClass::Critical,
            payload,
        }
    }
}
