//! The ground-control service: hosts the runtime models, turns UAV reports
//! into alerts, sessions and explanations, and validates operator commands.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::spec::MissionSpec;
use crate::adaptation::{Initiator, UavId};
use crate::agent::{
    validate_onboard, DetectionDecision, DetectionEvent, Health, MachineError, Outcome, StateKind,
    TaskEvent,
};
use crate::bus::{Envelope, Millis};
use crate::coord::{
    is_hard_safety_state, ActionLogEntry, AffordanceSet, AutonomyStatus, Conflict, CoordError,
    CoordinationSession, Coordinator, Decision, DirectiveAction, DirectiveKind, HumanDirective,
};
use crate::explain::{render, Explanation, ExplanationLog};
use crate::fleet::{FleetError, FleetModel, FleetSnapshot};
use crate::geo::GeoPoint;
use crate::message::{
    topics, AutonomyUpdate, CommandBody, CommandOutcome, CommandResult, ConsoleCommand,
    DetectionReport, DispatchOrder, GcsNote, NoteKind, Outgoing, Payload, RoutedDirective,
    RuleChange, SessionEvent, SessionMessage, StateChange, Telemetry, TriageUpdate, TrustReport,
};
use crate::triage::{
    Alert, AlertRule, ResponsivenessConfig, ResponsivenessMetric, RuleSet, TriageEngine,
    TriageError, ViewChanges,
};

pub const GCS_SENDER: &str = "gcs";

/// Everything the GCS listens to.
pub const GCS_SUBSCRIPTIONS: [&str; 6] = [
    "uav/+/telemetry",
    "uav/+/state",
    "uav/+/adaptation",
    "uav/+/detection",
    topics::HUMAN_DIRECTIVE,
    topics::HUMAN_RESPONSE,
];

const ADAPTATION_TTL_MS: Millis = 30_000;
const NOTICE_TTL_MS: Millis = 60_000;
const FRAME_EXPLANATIONS: usize = 10;

#[derive(Debug, Error)]
pub enum GcsError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Fleet(#[from] FleetError),
    #[error(transparent)]
    Triage(#[from] TriageError),
}

/// The GCS copy of one UAV's calibrated trust, built from its reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustMirror {
    pub capability: String,
    pub score: f64,
    pub outcomes: Vec<Outcome>,
    pub at: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewFrame {
    pub max_threshold: usize,
    /// Essentials first, then the capped ranked list.
    pub displayed: Vec<Alert>,
    pub essential: usize,
    pub suppressed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFrame {
    pub session: u64,
    pub uav: String,
    pub detection_id: u64,
    pub detection: DetectionEvent,
    pub opened_at: Millis,
    pub deadline: Millis,
    pub remaining_ms: Millis,
}

/// One self-contained view of the models, stamped with the model version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub version: u64,
    pub at: Millis,
    pub mission: String,
    pub fleet: FleetSnapshot,
    pub alerts: BTreeMap<String, ViewFrame>,
    pub sessions: Vec<SessionFrame>,
    pub affordances: BTreeMap<String, Vec<DirectiveKind>>,
    pub autonomy: AutonomyStatus,
    pub explanations: Vec<Explanation>,
    pub telemetry: BTreeMap<String, Telemetry>,
    pub trust: BTreeMap<String, TrustMirror>,
}

/// The model states replay must reproduce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcsSnapshot {
    pub fleet: FleetModel,
    pub triage: TriageEngine,
    pub coordination: Coordinator,
    pub trust: BTreeMap<String, TrustMirror>,
    pub explanations: ExplanationLog,
    pub responsiveness: ResponsivenessMetric,
    pub version: u64,
    pub stale_commands: u64,
}

impl GcsSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }
}

#[derive(Clone, Debug)]
pub struct GcsService {
    mission: String,
    fleet: FleetModel,
    triage: TriageEngine,
    coord: Coordinator,
    explanations: ExplanationLog,
    trust: BTreeMap<String, TrustMirror>,
    telemetry: BTreeMap<String, Telemetry>,
    responsiveness: ResponsivenessMetric,
    resp_cfg: ResponsivenessConfig,

    version: u64,
    affordances: BTreeMap<String, AffordanceSet>,
    affordance_versions: BTreeMap<String, u64>,

    help_alerts: BTreeMap<u64, u64>,
    tug_alerts: BTreeMap<String, u64>,
    last_detection: BTreeMap<String, GeoPoint>,
    dispatchable: BTreeSet<String>,
    dispatched: BTreeSet<String>,
    next_alert: u64,
    stale_commands: u64,

    outbox: Vec<Outgoing>,
    results: Vec<CommandResult>,
}

impl GcsService {
    pub fn new(spec: &MissionSpec) -> Result<Self, GcsError> {
        let mut machines = Vec::with_capacity(spec.uavs.len());
        for u in &spec.uavs {
            machines.push((u.uav_id(), validate_onboard(&u.machine)?));
        }
        let fleet = FleetModel::new(machines.iter().map(|(id, m)| (id, m)), 0)?;
        let dispatchable = machines
            .iter()
            .filter(|(_, m)| {
                m.transitions()
                    .iter()
                    .any(|t| t.event == TaskEvent::Dispatch.as_str())
            })
            .map(|(id, _)| id.name.clone())
            .collect();
        let mut triage = TriageEngine::new(RuleSet::new(spec.rules.iter().cloned()));
        for v in &spec.views {
            triage.register_view(&v.view, v.max_threshold)?;
        }
        let mut gcs = GcsService {
            mission: spec.name.clone(),
            fleet,
            triage,
            coord: Coordinator::new(spec.coordination),
            explanations: ExplanationLog::default(),
            trust: BTreeMap::new(),
            telemetry: BTreeMap::new(),
            responsiveness: ResponsivenessMetric::new(spec.responsiveness.window),
            resp_cfg: spec.responsiveness,
            version: 0,
            affordances: BTreeMap::new(),
            affordance_versions: BTreeMap::new(),
            help_alerts: BTreeMap::new(),
            tug_alerts: BTreeMap::new(),
            last_detection: BTreeMap::new(),
            dispatchable,
            dispatched: BTreeSet::new(),
            next_alert: 1,
            stale_commands: 0,
            outbox: Vec::new(),
            results: Vec::new(),
        };
        gcs.refresh_affordances();
        Ok(gcs)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn fleet(&self) -> &FleetModel {
        &self.fleet
    }

    pub fn triage(&self) -> &TriageEngine {
        &self.triage
    }

    pub fn coordination(&self) -> &Coordinator {
        &self.coord
    }

    pub fn explanations(&self) -> &ExplanationLog {
        &self.explanations
    }

    pub fn trust(&self) -> &BTreeMap<String, TrustMirror> {
        &self.trust
    }

    pub fn responsiveness(&self) -> &ResponsivenessMetric {
        &self.responsiveness
    }

    pub fn stale_commands(&self) -> u64 {
        self.stale_commands
    }

    pub fn affordances(&self, uav: &str) -> Option<&AffordanceSet> {
        self.affordances.get(uav)
    }

    pub fn has_open_sessions(&self) -> bool {
        self.coord.sessions().open_sessions().next().is_some()
    }

    pub fn snapshot(&self) -> GcsSnapshot {
        GcsSnapshot {
            fleet: self.fleet.clone(),
            triage: self.triage.clone(),
            coordination: self.coord.clone(),
            trust: self.trust.clone(),
            explanations: self.explanations.clone(),
            responsiveness: self.responsiveness.clone(),
            version: self.version,
            stale_commands: self.stale_commands,
        }
    }

    /// Messages to publish, in the order they were produced.
    pub fn take_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.outbox)
    }

    /// Command outcomes not yet handed to the console.
    pub fn take_results(&mut self) -> Vec<CommandResult> {
        std::mem::take(&mut self.results)
    }

    /// Earliest pending session deadline or alert expiry.
    pub fn next_due(&self) -> Option<Millis> {
        let deadline = self
            .coord
            .sessions()
            .open_sessions()
            .map(CoordinationSession::deadline)
            .min();
        let expiry = self.triage.live().filter_map(|a| a.expires_at).min();
        match (deadline, expiry) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn frame(&self, now: Millis) -> Frame {
        let alerts = self
            .triage
            .views()
            .map(|v| {
                let displayed = v
                    .displayed()
                    .into_iter()
                    .filter_map(|id| self.triage.alert(id).cloned())
                    .collect();
                let frame = ViewFrame {
                    max_threshold: v.max_threshold,
                    displayed,
                    essential: v.essential_ids().len(),
                    suppressed: v.suppressed().len(),
                };
                (v.view.clone(), frame)
            })
            .collect();
        let sessions = self
            .coord
            .sessions()
            .open_sessions()
            .map(|s| SessionFrame {
                session: s.id,
                uav: s.uav.clone(),
                detection_id: s.detection_id,
                detection: s.detection.clone(),
                opened_at: s.opened_at,
                deadline: s.deadline(),
                remaining_ms: s.remaining(now),
            })
            .collect();
        Frame {
            version: self.version,
            at: now,
            mission: self.mission.clone(),
            fleet: self.fleet.snapshot(now),
            alerts,
            sessions,
            affordances: self
                .affordances
                .iter()
                .map(|(u, a)| (u.clone(), a.kinds.iter().copied().collect()))
                .collect(),
            autonomy: self.coord.autonomy().clone(),
            explanations: self.explanations.latest(FRAME_EXPLANATIONS).to_vec(),
            telemetry: self.telemetry.clone(),
            trust: self.trust.clone(),
        }
    }

    fn refresh_affordances(&mut self) {
        let members: Vec<String> = self.fleet.members().map(|m| m.name.clone()).collect();
        for uav in members {
            let state = self.fleet.state_of(&uav).unwrap_or_default().to_string();
            let set = self.coord.compute_affordances(&uav, &state);
            if self.affordances.get(&uav) != Some(&set) {
                self.affordances.insert(uav.clone(), set);
                self.affordance_versions.insert(uav, self.version);
            }
        }
    }

    /// Every model change bumps the version; affordance changes are stamped with it.
    fn changed(&mut self) {
        self.version += 1;
        self.refresh_affordances();
    }

    fn publish_triage(
        &mut self,
        changes: BTreeMap<String, ViewChanges>,
        alert: Option<&Alert>,
        at: Millis,
    ) {
        for (view, ch) in changes {
            if ch.changes.is_empty() && alert.is_none() {
                continue;
            }
            let Some(v) = self.triage.view(&view) else {
                continue;
            };
            let update = TriageUpdate {
                view: view.clone(),
                changes: ch.changes,
                displayed: v.displayed(),
                suppressed: v.suppressed(),
                alert: alert.cloned(),
                at,
            };
            self.outbox.push(Outgoing::standard(
                topics::alerts(&view),
                Payload::Triage(update),
            ));
        }
    }

    fn raise(
        &mut self,
        alert_type: &str,
        source: &str,
        message: String,
        at: Millis,
        ttl: Option<Millis>,
        essential: bool,
    ) -> u64 {
        let id = self.next_alert;
        self.next_alert += 1;
        let alert = Alert {
            id,
            alert_type: alert_type.into(),
            source: source.into(),
            message,
            raised_at: at,
            expires_at: ttl.map(|t| at + t),
            essential,
        };
        let changes = self
            .triage
            .submit_alert(alert.clone())
            .expect("alert ids are fresh and expiries follow raise time");
        self.publish_triage(changes, Some(&alert), at);
        self.changed();
        id
    }

    fn withdraw(&mut self, id: Option<u64>, at: Millis) {
        if let Some(changes) = id.and_then(|id| self.triage.withdraw(id)) {
            self.publish_triage(changes, None, at);
            self.changed();
        }
    }

    fn note(
        &mut self,
        kind: NoteKind,
        uav: Option<&str>,
        session: Option<u64>,
        detail: String,
        at: Millis,
    ) {
        let n = GcsNote {
            kind,
            uav: uav.map(str::to_string),
            session,
            detail,
            at,
        };
        self.outbox
            .push(Outgoing::standard(topics::GCS_LOG, Payload::Note(n)));
    }

    fn session_message(&mut self, s: &CoordinationSession, event: SessionEvent, at: Millis) {
        let m = SessionMessage {
            session: s.id,
            uav: s.uav.clone(),
            detection_id: s.detection_id,
            event,
            at,
        };
        self.outbox
            .push(Outgoing::critical(topics::coord(s.id), Payload::Session(m)));
    }

    /// Processes one delivered envelope. Timeouts strictly before `at` fire
    /// first, so a response landing exactly on a deadline wins.
    pub fn ingest(&mut self, env: &Envelope, at: Millis) {
        self.advance_to(at);
        match &env.payload {
            Payload::Telemetry(t) => self.on_telemetry(t, at),
            Payload::StateChange(c) => self.on_state(c, at),
            Payload::Detection(d) => self.on_detection(d, at),
            Payload::Adaptation(e) => self.on_adaptation(e, at),
            Payload::Trust(r) => self.on_trust(r),
            Payload::DirectiveResult(r) if !r.accepted => {
                let reason = r.reason.clone().unwrap_or_default();
                self.raise(
                    "directive_rejected",
                    &r.uav,
                    format!("{} refused {:?}: {reason}", r.uav, r.kind),
                    at,
                    Some(NOTICE_TTL_MS),
                    false,
                );
            }
            Payload::Command(c) => self.on_command(c, at),
            _ => {}
        }
    }

    /// Fires session timeouts due strictly before `at`.
    pub fn advance_to(&mut self, at: Millis) {
        for s in self.coord.tick(at, false) {
            self.on_timeout(&s);
        }
    }

    /// End-of-step housekeeping: timeouts and alert expiries due at or before `now`.
    pub fn tick(&mut self, now: Millis) {
        for s in self.coord.tick(now, true) {
            self.on_timeout(&s);
        }
        let (expired, changes) = self.triage.expire(now);
        if !expired.is_empty() {
            self.publish_triage(changes, None, now);
            self.changed();
        }
    }

    /// Sends every UAV home on behalf of the mission, bypassing the operator gate.
    pub fn abort(&mut self, at: Millis) {
        let members: Vec<String> = self.fleet.members().map(|m| m.name.clone()).collect();
        for uav in &members {
            let d = HumanDirective::new(uav, at, DirectiveAction::ReturnToLaunch);
            let routed = RoutedDirective {
                directive: d,
                origin: Initiator::Machine,
            };
            self.outbox.push(Outgoing::critical(
                topics::directive(uav),
                Payload::Directive(routed),
            ));
        }
        self.note(
            NoteKind::MissionAborted,
            None,
            None,
            format!("return to launch sent to {} UAVs", members.len()),
            at,
        );
    }

    fn on_telemetry(&mut self, t: &Telemetry, at: Millis) {
        let was = self
            .telemetry
            .insert(t.uav.clone(), t.clone())
            .map(|p| p.health);
        if t.health == Health::Failsafe && was != Some(Health::Failsafe) {
            let msg = format!(
                "{} battery at {:.1}%, returning to launch",
                t.uav, t.battery
            );
            self.raise("battery_failsafe", &t.uav, msg, at, None, true);
        }
    }

    fn on_state(&mut self, c: &StateChange, at: Millis) {
        match self.fleet.update_token(&c.uav, &c.to, at) {
            Ok(_) => self.changed(),
            Err(e) => {
                self.note(NoteKind::ModelDrift, Some(&c.uav), None, e.to_string(), at);
                self.raise(
                    "model_drift",
                    &c.uav,
                    format!("runtime model out of date: {e}"),
                    at,
                    None,
                    true,
                );
                return;
            }
        }
        if c.to == StateKind::Tracking.as_str() {
            self.dispatch_delivery(&c.uav, at);
        }
    }

    fn dispatch_delivery(&mut self, tracker: &str, at: Millis) {
        let Some(target) = self
            .last_detection
            .get(tracker)
            .copied()
            .or_else(|| self.telemetry.get(tracker).map(|t| t.position))
        else {
            return;
        };
        let standby = StateKind::Standby.as_str();
        let Some(uav) = self
            .dispatchable
            .iter()
            .find(|u| !self.dispatched.contains(*u) && self.fleet.state_of(u) == Some(standby))
            .cloned()
        else {
            return;
        };
        self.dispatched.insert(uav.clone());
        let order = DispatchOrder {
            uav: uav.clone(),
            target,
            at,
        };
        self.outbox.push(Outgoing::standard(
            topics::directive(&uav),
            Payload::Dispatch(order),
        ));
        self.changed();
    }

    fn on_detection(&mut self, d: &DetectionReport, at: Millis) {
        let uav = d.detection.uav.clone();
        self.last_detection
            .insert(uav.clone(), d.detection.location);
        match d.decision {
            DetectionDecision::RequestHelp if !d.reverted => {
                match self.coord.open_session(&uav, d.id, d.detection.clone(), at) {
                    Ok(s) => {
                        self.session_message(&s, SessionEvent::HelpRequested, at);
                        let msg = format!(
                            "{uav} asks for help with a possible victim (confidence {:.2}, reliability {:.2})",
                            d.detection.confidence, d.detection.reliability
                        );
                        let id = self.raise("help_request", &uav, msg, at, None, true);
                        self.help_alerts.insert(s.id, id);
                    }
                    Err(e) => tracing::warn!(%uav, error = %e, "help request ignored"),
                }
            }
            DetectionDecision::ActAutonomously => {
                let msg = format!("{uav} is tracking a victim sighting");
                self.raise("victim_sighted", &uav, msg, at, Some(NOTICE_TTL_MS), false);
            }
            _ => {}
        }
    }

    fn on_adaptation(&mut self, e: &crate::adaptation::AdaptationEvent, at: Millis) {
        match render(e, at) {
            Ok(x) => {
                let text = x.text.clone();
                self.explanations.push(x.clone());
                self.outbox.push(Outgoing::standard(
                    topics::EXPLANATIONS,
                    Payload::Explanation(x),
                ));
                self.raise(
                    "adaptation",
                    &e.uav.name,
                    text,
                    at,
                    Some(ADAPTATION_TTL_MS),
                    false,
                );
            }
            Err(err) => self.note(
                NoteKind::RenderFailure,
                Some(&e.uav.name),
                None,
                err.to_string(),
                at,
            ),
        }
        let Some(c) = &e.control else { return };
        let entry = ActionLogEntry {
            actor: e.initiator,
            uav: e.uav.name.clone(),
            dimension: c.dimension.clone(),
            direction: c.direction.clone(),
            at: e.at,
            failsafe: c.failsafe,
        };
        match self.coord.record_action(entry) {
            Ok(Some(conflict)) => self.curtail(&e.uav, &conflict, at),
            Ok(None) => self.changed(),
            Err(err) => {
                tracing::warn!(uav = %e.uav.name, error = %err, "control action not recorded")
            }
        }
    }

    fn curtail(&mut self, uav: &UavId, conflict: &Conflict, at: Millis) {
        let c = self.coord.break_cycle(conflict);
        let update = AutonomyUpdate {
            uav: uav.name.clone(),
            dimension: conflict.dimension.clone(),
            curtailed: true,
            at,
        };
        self.outbox.push(Outgoing::critical(
            topics::directive(&uav.name),
            Payload::Autonomy(update),
        ));
        self.note(
            NoteKind::TugOfWar,
            Some(&uav.name),
            None,
            format!(
                "{} alternations on {}",
                conflict.alternations, conflict.dimension
            ),
            at,
        );
        self.note(
            NoteKind::Curtailed,
            Some(&uav.name),
            None,
            c.reason.clone(),
            at,
        );
        let msg = format!(
            "UAV-{} and the operator keep reversing each other on {}; its {} autonomy is held until you restore it",
            uav.display_color(),
            conflict.dimension,
            conflict.dimension
        );
        let id = self.raise("tug_of_war", &uav.name, msg, at, None, true);
        if let Some(old) = self.tug_alerts.insert(uav.name.clone(), id) {
            self.withdraw(Some(old), at);
        }
    }

    fn on_trust(&mut self, r: &TrustReport) {
        let m = self
            .trust
            .entry(r.uav.clone())
            .or_insert_with(|| TrustMirror {
                capability: r.capability.clone(),
                score: r.score,
                outcomes: Vec::new(),
                at: r.at,
            });
        m.score = r.score;
        m.outcomes.push(r.outcome);
        m.at = r.at;
        self.changed();
    }

    fn on_timeout(&mut self, s: &CoordinationSession) {
        let at = s.deadline();
        self.session_message(s, SessionEvent::NoResponse, at);
        self.note(
            NoteKind::HumanFailureToRespond,
            Some(&s.uav),
            Some(s.id),
            format!(
                "no answer to session {} within {} ms; responsibility reverts to {}",
                s.id, s.waiting_period, s.uav
            ),
            at,
        );
        let alert = self.help_alerts.remove(&s.id);
        self.withdraw(alert, at);
        let msg = format!("no answer in time; {} decides on its own scores", s.uav);
        self.raise(
            "responsibility_reverted",
            &s.uav,
            msg,
            at,
            Some(NOTICE_TTL_MS),
            false,
        );
        self.responsiveness.record_unanswered(s.opened_at);
        self.adapt_rules(at);
        self.changed();
    }

    fn adapt_rules(&mut self, at: Millis) {
        let changes = self
            .triage
            .adapt_frequency(&self.responsiveness, &self.resp_cfg, at);
        if changes.is_empty() {
            return;
        }
        for rc in changes {
            self.outbox
                .push(Outgoing::standard(topics::RULES, Payload::RuleChange(rc)));
        }
        self.changed();
    }

    fn result(
        &mut self,
        command_id: u64,
        outcome: CommandOutcome,
        reason: Option<String>,
        at: Millis,
    ) {
        let r = CommandResult {
            command_id,
            outcome,
            reason,
            at,
        };
        self.results.push(r.clone());
        self.outbox.push(Outgoing::standard(
            topics::GCS_LOG,
            Payload::CommandResult(r),
        ));
    }

    fn reject(&mut self, c: &ConsoleCommand, reason: String, at: Millis) {
        self.result(c.id, CommandOutcome::Rejected, Some(reason), at);
    }

    fn stale(
        &mut self,
        c: &ConsoleCommand,
        uav: Option<&str>,
        session: Option<u64>,
        reason: String,
        at: Millis,
    ) {
        self.stale_commands += 1;
        self.note(
            NoteKind::StaleAction,
            uav,
            session,
            format!("command {}: {reason}", c.id),
            at,
        );
        self.result(c.id, CommandOutcome::Stale, Some(reason.clone()), at);
        self.raise(
            "stale_action",
            uav.unwrap_or(GCS_SENDER),
            format!("ignored an outdated action: {reason}"),
            at,
            Some(NOTICE_TTL_MS),
            false,
        );
    }

    /// Why a command stamped with `version` no longer matches what the
    /// operator saw, if it does not.
    fn staleness(&self, version: u64, target: Option<&str>) -> Option<String> {
        if version > self.version {
            return Some(format!(
                "frame version {version} is ahead of model version {}",
                self.version
            ));
        }
        let t = target?;
        let changed_at = *self.affordance_versions.get(t)?;
        (changed_at > version).then(|| {
            format!(
                "affordances of {t} changed at version {changed_at}, after frame version {version}"
            )
        })
    }

    fn on_command(&mut self, c: &ConsoleCommand, at: Millis) {
        match &c.command {
            CommandBody::Resolve { session, decision } => self.resolve(c, *session, *decision, at),
            CommandBody::Directive { directive } => match directive.action {
                DirectiveAction::ConfirmDetection { session } => {
                    self.resolve(c, session, Decision::Confirm, at)
                }
                DirectiveAction::RejectDetection { session } => {
                    self.resolve(c, session, Decision::Reject, at)
                }
                _ => self.directive(c, directive, at),
            },
            CommandBody::DismissAlert { alert } => self.dismiss(c, *alert, at),
            CommandBody::UpdateRule { rule } => self.update_rule(c, rule, at),
        }
    }

    fn resolve(&mut self, c: &ConsoleCommand, session: u64, decision: Decision, at: Millis) {
        let Some(s) = self.coord.sessions().get(session).cloned() else {
            return self.reject(c, format!("unknown session {session}"), at);
        };
        if s.state.is_terminal() {
            return self.stale(
                c,
                Some(&s.uav),
                Some(session),
                format!("session {session} is already {:?}", s.state),
                at,
            );
        }
        if let Some(reason) = self.staleness(c.version, Some(&s.uav)) {
            return self.stale(c, Some(&s.uav), Some(session), reason, at);
        }
        match self.coord.resolve(session, decision, at) {
            Ok(s) => {
                let event = match decision {
                    Decision::Confirm => SessionEvent::Confirmation,
                    Decision::Reject => SessionEvent::Refutation,
                };
                self.session_message(&s, event, at);
                self.responsiveness.record_answered(s.opened_at, at);
                let alert = self.help_alerts.remove(&s.id);
                self.withdraw(alert, at);
                self.result(c.id, CommandOutcome::Accepted, None, at);
                self.adapt_rules(at);
                self.changed();
            }
            Err(e @ (CoordError::LateResponse { .. } | CoordError::SessionClosed { .. })) => {
                self.stale(c, Some(&s.uav), Some(session), e.to_string(), at)
            }
            Err(e) => self.reject(c, e.to_string(), at),
        }
    }

    fn directive(&mut self, c: &ConsoleCommand, d: &HumanDirective, at: Millis) {
        let Some(state) = self.fleet.state_of(&d.target).map(str::to_string) else {
            return self.reject(c, format!("unknown UAV `{}`", d.target), at);
        };
        if let Some(reason) = self.staleness(c.version, Some(&d.target)) {
            return self.stale(c, Some(&d.target), None, reason, at);
        }
        if d.is_rc() {
            if is_hard_safety_state(&state) {
                return self.reject(
                    c,
                    format!("manual override refused in hard-safety state {state}"),
                    at,
                );
            }
        } else {
            let allowed = self.coord.compute_affordances(&d.target, &state);
            if !allowed.allows(d.kind()) {
                let reason = format!(
                    "{:?} is not available for {} in state {state}",
                    d.kind(),
                    d.target
                );
                self.raise(
                    "directive_rejected",
                    &d.target,
                    reason.clone(),
                    at,
                    Some(NOTICE_TTL_MS),
                    false,
                );
                return self.reject(c, reason, at);
            }
        }
        if let DirectiveAction::RestoreAutonomy { dimension } = &d.action {
            return self.restore(c, &d.target, dimension.as_deref(), at);
        }
        let routed = RoutedDirective {
            directive: d.clone(),
            origin: Initiator::Human,
        };
        let topic = topics::directive(&d.target);
        let out = if d.is_rc() {
            Outgoing::critical(topic, Payload::Directive(routed))
        } else {
            Outgoing::standard(topic, Payload::Directive(routed))
        };
        self.outbox.push(out);
        self.result(c.id, CommandOutcome::Accepted, None, at);
    }

    fn restore(&mut self, c: &ConsoleCommand, uav: &str, dimension: Option<&str>, at: Millis) {
        match self
            .coord
            .restore_autonomy(uav, dimension, Initiator::Human)
        {
            Ok(dims) => {
                for dim in &dims {
                    let update = AutonomyUpdate {
                        uav: uav.into(),
                        dimension: dim.clone(),
                        curtailed: false,
                        at,
                    };
                    self.outbox.push(Outgoing::critical(
                        topics::directive(uav),
                        Payload::Autonomy(update),
                    ));
                }
                self.note(
                    NoteKind::Restored,
                    Some(uav),
                    None,
                    format!("operator restored {}", dims.join(", ")),
                    at,
                );
                let alert = self.tug_alerts.remove(uav);
                self.withdraw(alert, at);
                self.result(c.id, CommandOutcome::Accepted, None, at);
                self.changed();
            }
            Err(e) => {
                self.note(
                    NoteKind::RejectedRestore,
                    Some(uav),
                    None,
                    e.to_string(),
                    at,
                );
                self.reject(c, e.to_string(), at);
            }
        }
    }

    fn dismiss(&mut self, c: &ConsoleCommand, alert: u64, at: Millis) {
        if let Some(reason) = self.staleness(c.version, None) {
            return self.stale(c, None, None, reason, at);
        }
        if self.triage.alert(alert).is_none() {
            return self.stale(
                c,
                None,
                None,
                format!("alert {alert} is no longer live"),
                at,
            );
        }
        self.withdraw(Some(alert), at);
        self.result(c.id, CommandOutcome::Accepted, None, at);
    }

    fn update_rule(&mut self, c: &ConsoleCommand, rule: &AlertRule, at: Millis) {
        if let Some(reason) = self.staleness(c.version, None) {
            return self.stale(c, None, None, reason, at);
        }
        if self.triage.view(&rule.view).is_none() {
            return self.reject(c, format!("unknown view `{}`", rule.view), at);
        }
        match self.triage.update_rule(rule.clone(), Initiator::Human) {
            Ok((previous, changes)) => {
                let rc = RuleChange {
                    alert_type: rule.alert_type.clone(),
                    view: rule.view.clone(),
                    previous: previous.map(|r| r.entry),
                    entry: rule.entry,
                    origin: Initiator::Human,
                    at,
                };
                self.outbox
                    .push(Outgoing::standard(topics::RULES, Payload::RuleChange(rc)));
                self.publish_triage(changes, None, at);
                self.changed();
                self.result(c.id, CommandOutcome::Accepted, None, at);
            }
            Err(e) => self.reject(c, e.to_string(), at),
        }
    }
}
