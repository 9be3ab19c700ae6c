//! One simulated UAV: the onboard monitor/analyze/plan/execute loop over its
//! task state machine.

mod machine;
mod perception;
mod policy;

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use machine::{
    delivery_machine, search_machine, surveillance_machine, validate_onboard, MachineError,
    MachineSpec, StateKind, TaskEvent, TaskStateMachine, Transition,
};
pub use perception::{
    detect, footprint_radius, CameraView, DetectionEvent, NoiseModel, NoiseProfile, ObjectKind,
    ReflectionHazard, Scene, SceneObject, ScoreDist, Weather, WeatherChange, DEFAULT_HALF_FOV_DEG,
};
pub use policy::{
    CalibratedTrust, DetectionDecision, Outcome, PolicyError, ThresholdPolicy, Thresholds,
    DEFAULT_CONFIDENCE_ACT, DEFAULT_INITIAL_TRUST, DEFAULT_RELIABILITY_ACT, DEFAULT_TRUST_ALPHA,
    DEFAULT_TRUST_FLOOR,
};

use crate::adaptation::{AdaptationEvent, Direction, Initiator, UavId, ALTITUDE, MODE};
use crate::bus::{Envelope, Millis};
use crate::coord::{
    is_hard_safety_state, AffordanceTable, DirectiveAction, DirectiveKind, HumanDirective,
};
use crate::geo::{GeoPoint, Local, Projection};
use crate::message::{
    topics, AutonomyUpdate, DetectionReport, DirectiveResult, DispatchOrder, Outgoing, Payload,
    RoutedDirective, SessionEvent, SessionMessage, StateChange, Telemetry, TrustReport,
};

pub const PERSON_DETECTION: &str = "person-detection";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Nominal,
    Degraded,
    Failsafe,
}

/// Flight and payload parameters of one airframe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightParams {
    pub cruise_altitude_m: f64,
    pub min_altitude_m: f64,
    pub max_altitude_m: f64,
    pub speed_mps: f64,
    pub climb_mps: f64,
    pub battery_pct: f64,
    /// Drain while airborne, percent per simulated minute.
    pub drain_pct_per_min: f64,
    pub failsafe_floor_pct: f64,
    /// Health reads degraded below floor + this margin.
    pub degraded_margin_pct: f64,
    pub track_duration_ms: Millis,
    pub delivery_hold_ms: Millis,
    pub mist_descent_m: f64,
    pub half_fov_deg: f64,
    /// Sightings closer than this to an already handled one are ignored.
    pub ignore_radius_m: f64,
}

impl Default for FlightParams {
    fn default() -> Self {
        FlightParams {
            cruise_altitude_m: 30.0,
            min_altitude_m: 5.0,
            max_altitude_m: 120.0,
            speed_mps: 10.0,
            climb_mps: 3.0,
            battery_pct: 100.0,
            drain_pct_per_min: 2.0,
            failsafe_floor_pct: 20.0,
            degraded_margin_pct: 10.0,
            track_duration_ms: 20_000,
            delivery_hold_ms: 5_000,
            mist_descent_m: 8.0,
            half_fov_deg: DEFAULT_HALF_FOV_DEG,
            ignore_radius_m: 15.0,
        }
    }
}

fn person_detection() -> String {
    PERSON_DETECTION.into()
}

/// The per-UAV section of a mission spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavFragment {
    pub id: String,
    pub color: String,
    pub machine: MachineSpec,
    #[serde(default)]
    pub route: Vec<GeoPoint>,
    pub home: GeoPoint,
    /// Launch time; `None` keeps the UAV in standby until dispatched or given a goal.
    #[serde(default)]
    pub launch_at_ms: Option<Millis>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub flight: FlightParams,
    #[serde(default = "person_detection")]
    pub capability: String,
}

impl UavFragment {
    pub fn uav_id(&self) -> UavId {
        UavId::new(&self.id, &self.color)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PendingHelp {
    detection_id: u64,
    detection: DetectionEvent,
    session: Option<u64>,
}

/// A simulated UAV. Stepped by exactly one driver; talks to the world only
/// through the envelopes it is handed and the outputs it returns.
#[derive(Clone, Debug)]
pub struct UavAgent {
    id: UavId,
    machine: TaskStateMachine,
    policy: ThresholdPolicy,
    flight: FlightParams,
    proj: Projection,
    table: AffordanceTable,
    rng: ChaCha8Rng,

    route: Vec<Local>,
    route_idx: usize,
    home: Local,
    position: Local,
    altitude: f64,
    setpoint: f64,
    battery: f64,
    health: Health,
    launch_at: Option<Millis>,
    last_step: Option<Millis>,

    frame: u64,
    detections: u64,
    pending: Option<PendingHelp>,
    handled: Vec<Local>,
    target: Option<Local>,
    timer_until: Option<Millis>,
    manual: bool,
    curtailed: BTreeSet<String>,
    mist_applied: bool,
    next_hazard: Vec<Millis>,
    telemetry_every: Millis,
    next_telemetry: Millis,
    out: Vec<Outgoing>,
}

impl UavAgent {
    /// Validates the fragment and sets the machine to its initial state.
    pub fn instantiate(
        fragment: &UavFragment,
        proj: Projection,
        rng: ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        let machine = validate_onboard(&fragment.machine)?;
        let policy = ThresholdPolicy::new(&fragment.thresholds, &fragment.capability)?;
        let home = proj.to_local(fragment.home);
        Ok(UavAgent {
            id: fragment.uav_id(),
            machine,
            policy,
            flight: fragment.flight,
            proj,
            table: AffordanceTable::standard(),
            rng,
            route: fragment.route.iter().map(|p| proj.to_local(*p)).collect(),
            route_idx: 0,
            home,
            position: home,
            altitude: 0.0,
            setpoint: 0.0,
            battery: fragment.flight.battery_pct,
            health: Health::Nominal,
            launch_at: fragment.launch_at_ms,
            last_step: None,
            frame: 0,
            detections: 0,
            pending: None,
            handled: Vec::new(),
            target: None,
            timer_until: None,
            manual: false,
            curtailed: BTreeSet::new(),
            mist_applied: false,
            next_hazard: Vec::new(),
            telemetry_every: 0,
            next_telemetry: 0,
            out: Vec::new(),
        })
    }

    /// Telemetry period; zero reports on every step.
    pub fn set_telemetry_interval(&mut self, every: Millis) {
        self.telemetry_every = every;
    }

    pub fn id(&self) -> &UavId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.id.name
    }

    pub fn machine(&self) -> &TaskStateMachine {
        &self.machine
    }

    pub fn state(&self) -> &str {
        self.machine.current()
    }

    pub fn trust(&self) -> &CalibratedTrust {
        &self.policy.trust
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    pub fn battery(&self) -> f64 {
        self.battery
    }

    pub fn position(&self) -> GeoPoint {
        self.proj.to_geo(self.position)
    }

    pub fn is_curtailed(&self, dimension: &str) -> bool {
        self.curtailed.contains(dimension)
    }

    /// Landed, or parked in standby with nothing scheduled.
    pub fn at_rest(&self) -> bool {
        match self.kind() {
            Some(StateKind::Land) => self.altitude <= 0.0,
            Some(StateKind::Standby) => self.launch_at.is_none(),
            _ => false,
        }
    }

    /// Topics this agent must subscribe to.
    pub fn subscriptions(&self) -> Vec<String> {
        vec![topics::directive(&self.id.name), "gcs/coord/+".to_string()]
    }

    fn kind(&self) -> Option<StateKind> {
        self.machine.current().parse().ok()
    }

    fn emit(&mut self, o: Outgoing) {
        self.out.push(o);
    }

    fn fire(&mut self, event: TaskEvent, now: Millis) -> bool {
        let Some(t) = self.machine.fire(event.as_str()) else {
            return false;
        };
        tracing::debug!(uav = %self.id.name, from = %t.from, to = %t.to, "transition");
        self.on_enter(now);
        let change = StateChange {
            uav: self.id.name.clone(),
            from: t.from,
            event: t.event,
            to: t.to,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::state(&self.id.name),
            Payload::StateChange(change),
        ));
        true
    }

    fn on_enter(&mut self, now: Millis) {
        self.timer_until = None;
        match self.kind() {
            Some(StateKind::Takeoff) => self.setpoint = self.flight.cruise_altitude_m,
            Some(StateKind::Tracking) => {
                self.timer_until = Some(now + self.flight.track_duration_ms)
            }
            Some(StateKind::Rtl) => self.target = Some(self.home),
            Some(StateKind::Land) => self.setpoint = 0.0,
            _ => {}
        }
    }

    fn adapt(&mut self, e: AdaptationEvent) {
        debug_assert!(e.missing_snippets().is_empty());
        self.emit(Outgoing::standard(
            topics::adaptation(&self.id.name),
            Payload::Adaptation(e),
        ));
    }

    fn set_altitude(&mut self, target: f64) -> f64 {
        let clamped = target.clamp(self.flight.min_altitude_m, self.flight.max_altitude_m);
        let delta = clamped - self.setpoint;
        self.setpoint = clamped;
        delta
    }

    /// Handles one delivered envelope. Outputs are returned by the next `step`.
    pub fn receive(&mut self, env: &Envelope, now: Millis) {
        match &env.payload {
            Payload::Directive(d) if d.directive.target == self.id.name => {
                self.apply_routed(d, now)
            }
            Payload::Autonomy(u) if u.uav == self.id.name => self.apply_autonomy(u),
            Payload::Dispatch(d) if d.uav == self.id.name => self.apply_dispatch(d, now),
            Payload::Session(s) if s.uav == self.id.name => self.apply_session(s, now),
            _ => {}
        }
    }

    fn apply_autonomy(&mut self, u: &AutonomyUpdate) {
        if u.curtailed {
            self.curtailed.insert(u.dimension.clone());
        } else {
            self.curtailed.remove(&u.dimension);
        }
    }

    fn apply_dispatch(&mut self, d: &DispatchOrder, now: Millis) {
        let target = self.proj.to_local(d.target);
        if !self.machine.can_fire(TaskEvent::Dispatch.as_str()) {
            return;
        }
        self.target = Some(target);
        self.fire(TaskEvent::Dispatch, now);
        let e = AdaptationEvent::external_machine(
            &self.id,
            "a tracked victim awaiting supplies",
            "launching for delivery",
            "bring a flotation device to the victim",
            now,
        );
        self.adapt(e);
    }

    fn apply_routed(&mut self, routed: &RoutedDirective, now: Millis) {
        let d = &routed.directive;
        // GCS-originated directives (mission abort) skip the operator gate.
        let result = if routed.origin == Initiator::Machine {
            self.execute_directive(d, now, false)
        } else {
            self.apply_directive(d, now)
        };
        let (accepted, reason) = match result {
            Ok(()) => (true, None),
            Err(r) => (false, Some(r)),
        };
        let r = DirectiveResult {
            uav: self.id.name.clone(),
            kind: d.kind(),
            accepted,
            reason,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::state(&self.id.name),
            Payload::DirectiveResult(r),
        ));
    }

    /// Ack iff the directive's kind is afforded in the current state (RC
    /// overrides pass unless the state is a hard-safety one).
    pub fn apply_directive(&mut self, d: &HumanDirective, now: Millis) -> Result<(), String> {
        let state = self.machine.current().to_string();
        if d.is_rc() {
            if is_hard_safety_state(&state) {
                return Err(format!(
                    "manual override refused in hard-safety state {state}"
                ));
            }
        } else {
            let open = self.pending.as_ref().is_some_and(|p| p.session.is_some());
            let allowed = self.table.compute(&state, open, !self.curtailed.is_empty());
            if !allowed.allows(d.kind()) {
                return Err(format!("{:?} is not available in state {state}", d.kind()));
            }
        }
        self.execute_directive(d, now, true)
    }

    fn execute_directive(
        &mut self,
        d: &HumanDirective,
        now: Millis,
        from_operator: bool,
    ) -> Result<(), String> {
        match &d.action {
            DirectiveAction::AltitudeChange { delta_m } => {
                let applied = self.set_altitude(self.setpoint + delta_m);
                let dir = Direction::of_delta(*delta_m).unwrap_or(Direction::Increase);
                let verb = if *delta_m >= 0.0 {
                    "a climb"
                } else {
                    "a descent"
                };
                let e = AdaptationEvent::external_human(
                    &self.id,
                    "an operator altitude request",
                    &format!("{verb} of {:.0} m", applied.abs()),
                    "match the altitude the operator prefers",
                    now,
                )
                .with_control(ALTITUDE, dir, false);
                self.adapt(e);
                Ok(())
            }
            DirectiveAction::ReturnToLaunch => {
                if !self.fire(TaskEvent::ReturnHome, now) {
                    return Err(format!("no return path from state {}", self.state()));
                }
                let (event, rationale) = if from_operator {
                    ("an operator return request", "comply with the operator")
                } else {
                    ("a mission abort", "end the mission safely")
                };
                let e = AdaptationEvent::external_human(
                    &self.id,
                    event,
                    "a return to launch",
                    rationale,
                    now,
                );
                self.adapt(e);
                Ok(())
            }
            DirectiveAction::GoalUpdate { waypoints } => {
                if waypoints.is_empty() {
                    return Err("goal update carries no waypoints".into());
                }
                self.route = waypoints.iter().map(|p| self.proj.to_local(*p)).collect();
                self.route_idx = 0;
                if self.kind() == Some(StateKind::Standby) {
                    self.launch_at = Some(now);
                }
                let e = AdaptationEvent::external_human(
                    &self.id,
                    "an operator route update",
                    &format!("a new route of {} waypoints", waypoints.len()),
                    "cover the area the operator prioritized",
                    now,
                );
                self.adapt(e);
                Ok(())
            }
            DirectiveAction::ManualOverride { engage } => {
                self.manual = *engage;
                let (desired, dir) = if *engage {
                    ("manual control", Direction::Set("manual".into()))
                } else {
                    (
                        "a release of manual control",
                        Direction::Unset("manual".into()),
                    )
                };
                let e = AdaptationEvent::external_human(
                    &self.id,
                    "a radio-controller override",
                    desired,
                    "let the operator fly directly",
                    now,
                )
                .with_control(MODE, dir, false);
                self.adapt(e);
                Ok(())
            }
            DirectiveAction::VideoRequest => Ok(()),
            DirectiveAction::ConfirmDetection { .. }
            | DirectiveAction::RejectDetection { .. }
            | DirectiveAction::RestoreAutonomy { .. } => {
                Err(format!("{:?} is handled by the ground station", d.kind()))
            }
        }
    }

    fn apply_session(&mut self, s: &SessionMessage, now: Millis) {
        let Some(p) = self.pending.as_mut() else {
            return;
        };
        if p.detection_id != s.detection_id {
            return;
        }
        match s.event {
            SessionEvent::HelpRequested => p.session = Some(s.session),
            SessionEvent::Confirmation => {
                let p = self.pending.take().expect("pending");
                self.update_trust(Outcome::Confirmed, now);
                self.handled.push(self.proj.to_local(p.detection.location));
                if self.kind() == Some(StateKind::VictimDetected) {
                    self.target = Some(self.proj.to_local(p.detection.location));
                    self.fire(TaskEvent::Confirmed, now);
                    let e = AdaptationEvent::external_machine(
                        &self.id,
                        "victim detected",
                        "switched to tracking mode",
                        "high confidence in victim sighting",
                        now,
                    );
                    self.adapt(e);
                }
            }
            SessionEvent::Refutation => {
                let p = self.pending.take().expect("pending");
                self.update_trust(Outcome::Refuted, now);
                self.handled.push(self.proj.to_local(p.detection.location));
                if self.kind() == Some(StateKind::VictimDetected) {
                    self.fire(TaskEvent::Refuted, now);
                    let e = AdaptationEvent::internal_machine(
                        &self.id,
                        "a rejected sighting",
                        "resuming the search route",
                        "keep looking for the victim",
                        now,
                    );
                    self.adapt(e);
                }
            }
            SessionEvent::NoResponse => {
                let p = self.pending.take().expect("pending");
                self.handled.push(self.proj.to_local(p.detection.location));
                self.revert_responsibility(p, now);
            }
        }
    }

    /// The human did not answer: decide on scores alone.
    fn revert_responsibility(&mut self, p: PendingHelp, now: Millis) {
        let decision = self.policy.decide_without_trust(&p.detection);
        let report = DetectionReport {
            id: p.detection_id,
            detection: p.detection.clone(),
            decision,
            reverted: true,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::detection(&self.id.name),
            Payload::Detection(report),
        ));
        let action = if decision == DetectionDecision::ActAutonomously {
            "tracking the sighting on its own scores"
        } else {
            "dismissing the sighting on its own scores"
        };
        let e = AdaptationEvent::internal_machine(
            &self.id,
            "no operator response within the waiting period",
            action,
            "keep the mission moving",
            now,
        );
        self.adapt(e);
        if self.kind() != Some(StateKind::VictimDetected) {
            return;
        }
        if decision == DetectionDecision::ActAutonomously {
            self.target = Some(self.proj.to_local(p.detection.location));
            self.fire(TaskEvent::VictimSighted, now);
        } else {
            self.fire(TaskEvent::NoResponse, now);
        }
    }

    /// Folds one human agreement outcome into calibrated trust and reports it.
    pub fn update_trust(&mut self, outcome: Outcome, now: Millis) -> f64 {
        let score = self.policy.trust.update(outcome);
        let r = TrustReport {
            uav: self.id.name.clone(),
            capability: self.policy.trust.capability.clone(),
            score,
            outcome,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::state(&self.id.name),
            Payload::Trust(r),
        ));
        score
    }

    /// One monitor → analyze → plan → execute iteration.
    pub fn step(&mut self, now: Millis, scene: &Scene) -> Vec<Outgoing> {
        let dt = now.saturating_sub(self.last_step.unwrap_or(now));
        self.last_step = Some(now);
        let secs = dt as f64 / 1000.0;

        // monitor
        let airborne = self.kind().is_some_and(StateKind::airborne) || self.altitude > 0.0;
        if airborne {
            self.battery = (self.battery - self.flight.drain_pct_per_min * secs / 60.0).max(0.0);
        }
        let weather = scene.weather_at(now);

        // analyze + plan
        self.check_battery(now);
        self.check_weather(weather, now);
        self.check_hazards(scene, now);

        // execute
        self.fly(secs, now, scene);

        if now < self.next_telemetry {
            return std::mem::take(&mut self.out);
        }
        self.next_telemetry = now + self.telemetry_every;
        let t = Telemetry {
            uav: self.id.name.clone(),
            position: self.position(),
            altitude: self.altitude,
            battery: self.battery,
            health: self.health,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::telemetry(&self.id.name),
            Payload::Telemetry(t),
        ));
        std::mem::take(&mut self.out)
    }

    fn check_battery(&mut self, now: Millis) {
        let floor = self.flight.failsafe_floor_pct;
        if self.battery < floor {
            if self.health != Health::Failsafe {
                self.health = Health::Failsafe;
                let airborne = self.kind().is_some_and(StateKind::airborne);
                if airborne && self.machine.can_fire(TaskEvent::ReturnHome.as_str()) {
                    self.fire(TaskEvent::ReturnHome, now);
                    let e = AdaptationEvent::internal_machine(
                        &self.id,
                        &format!(
                            "battery at {:.1}% below the {:.0}% failsafe floor",
                            self.battery, floor
                        ),
                        "returning to launch",
                        "land with a safe charge reserve",
                        now,
                    )
                    .with_control(MODE, Direction::Set("rtl".into()), true);
                    self.adapt(e);
                }
            }
        } else if self.battery < floor + self.flight.degraded_margin_pct {
            self.health = Health::Degraded;
        }
    }

    fn camera_active(&self) -> bool {
        self.kind().is_some_and(StateKind::camera_on)
    }

    fn check_weather(&mut self, weather: Weather, now: Millis) {
        if !self.camera_active() || self.curtailed.contains(ALTITUDE) || self.manual {
            return;
        }
        let d = self.flight.mist_descent_m;
        match (weather, self.mist_applied) {
            (Weather::Misty, false) => {
                self.mist_applied = true;
                self.set_altitude(self.setpoint - d);
                let e = AdaptationEvent::external_machine(
                    &self.id,
                    "misty weather conditions",
                    &format!("reduced altitude by {d} m"),
                    "limited visibility",
                    now,
                )
                .with_control(ALTITUDE, Direction::Decrease, false);
                self.adapt(e);
            }
            (Weather::Clear, true) => {
                self.mist_applied = false;
                self.set_altitude(self.setpoint + d);
                let e = AdaptationEvent::external_machine(
                    &self.id,
                    "clearing weather",
                    &format!("restored altitude by {d} m"),
                    "regained visibility",
                    now,
                )
                .with_control(ALTITUDE, Direction::Increase, false);
                self.adapt(e);
            }
            _ => {}
        }
    }

    fn check_hazards(&mut self, scene: &Scene, now: Millis) {
        let mine: Vec<(usize, &ReflectionHazard)> = scene
            .hazards
            .iter()
            .enumerate()
            .filter(|(_, h)| h.uav == self.id.name)
            .collect();
        if self.next_hazard.len() < scene.hazards.len() {
            self.next_hazard = scene.hazards.iter().map(|h| h.from_ms).collect();
        }
        for (i, h) in mine {
            if now < self.next_hazard[i] || now >= h.until_ms || h.period_ms == 0 {
                continue;
            }
            while self.next_hazard[i] <= now {
                self.next_hazard[i] += h.period_ms;
            }
            if !self.camera_active() || self.manual || self.curtailed.contains(ALTITUDE) {
                continue;
            }
            self.set_altitude(self.setpoint - h.descent_m);
            let e = AdaptationEvent::external_machine(
                &self.id,
                "strong reflections off the water",
                &format!("lowered altitude by {} m", h.descent_m),
                "cut glare in the camera feed",
                now,
            )
            .with_control(ALTITUDE, Direction::Decrease, false);
            self.adapt(e);
        }
    }

    fn climb(&mut self, secs: f64) {
        let step = self.flight.climb_mps * secs;
        let diff = self.setpoint - self.altitude;
        self.altitude = if diff.abs() <= step {
            self.setpoint
        } else {
            self.altitude + step * diff.signum()
        };
        self.altitude = self.altitude.max(0.0);
    }

    /// Moves toward `target`; true once there.
    fn move_to(&mut self, target: Local, secs: f64) -> bool {
        if !self.manual {
            self.position = self
                .position
                .step_toward(target, self.flight.speed_mps * secs);
        }
        self.position.distance(target) < 1e-6
    }

    fn fly(&mut self, secs: f64, now: Millis, scene: &Scene) {
        let Some(kind) = self.kind() else {
            return;
        };
        if kind != StateKind::Standby {
            self.climb(secs);
        }
        match kind {
            StateKind::Standby => {
                if self.launch_at.is_some_and(|t| t <= now) {
                    self.launch_at = None;
                    self.fire(TaskEvent::Launch, now);
                }
            }
            StateKind::Takeoff => {
                if (self.altitude - self.setpoint).abs() < 1e-9 {
                    self.fire(TaskEvent::AltitudeReached, now);
                }
            }
            StateKind::Searching | StateKind::Surveillance => {
                if self.route_idx >= self.route.len() {
                    self.fire(TaskEvent::RouteComplete, now);
                    return;
                }
                if self.move_to(self.route[self.route_idx], secs) {
                    self.route_idx += 1;
                }
                if kind == StateKind::Searching {
                    self.look(scene, now);
                }
            }
            StateKind::VictimDetected => {}
            StateKind::Tracking => {
                if let Some(t) = self.target {
                    self.move_to(t, secs);
                }
                if self.timer_until.is_some_and(|t| t <= now) {
                    self.fire(TaskEvent::TrackComplete, now);
                }
            }
            StateKind::Delivery => {
                let arrived = self.target.is_some_and(|t| self.move_to(t, secs));
                if arrived && self.timer_until.is_none() {
                    self.timer_until = Some(now + self.flight.delivery_hold_ms);
                }
                if self.timer_until.is_some_and(|t| t <= now) {
                    self.fire(TaskEvent::Delivered, now);
                }
            }
            StateKind::Rtl => {
                if self.move_to(self.home, secs) {
                    self.fire(TaskEvent::HomeReached, now);
                }
            }
            StateKind::Land => {}
        }
    }

    fn look(&mut self, scene: &Scene, now: Millis) {
        self.frame += 1;
        let view = CameraView {
            uav: &self.id.name,
            position: self.position,
            altitude_m: self.altitude,
            half_fov_deg: self.flight.half_fov_deg,
            frame: self.frame,
            now,
            ignore: &self.handled,
            ignore_radius: self.flight.ignore_radius_m,
        };
        let Some((_, d)) = detect(scene, &self.proj, &view, &mut self.rng) else {
            return;
        };
        let decision = self.policy.decide(&d);
        self.detections += 1;
        let id = self.detections;
        match decision {
            DetectionDecision::ContinueSearch => {
                self.handled.push(self.proj.to_local(d.location));
                return;
            }
            DetectionDecision::ActAutonomously => {
                self.handled.push(self.proj.to_local(d.location));
                self.target = Some(self.proj.to_local(d.location));
            }
            DetectionDecision::RequestHelp => {
                self.pending = Some(PendingHelp {
                    detection_id: id,
                    detection: d.clone(),
                    session: None,
                });
            }
        }
        let report = DetectionReport {
            id,
            detection: d.clone(),
            decision,
            reverted: false,
            at: now,
        };
        self.emit(Outgoing::standard(
            topics::detection(&self.id.name),
            Payload::Detection(report),
        ));
        if decision == DetectionDecision::ActAutonomously {
            self.fire(TaskEvent::VictimSighted, now);
            let e = AdaptationEvent::external_machine(
                &self.id,
                "victim detected",
                "switched to tracking mode",
                "high confidence in victim sighting",
                now,
            );
            self.adapt(e);
        } else {
            self.fire(TaskEvent::HelpRequested, now);
            let cause = if d.reliability < self.policy.reliability_act {
                "low detection reliability"
            } else {
                "low calibrated trust in person detection"
            };
            let e = AdaptationEvent::internal_human(
                &self.id,
                "a possible victim",
                cause,
                "a confirmation or rejection of the sighting",
                "decide whether to start tracking",
                now,
            );
            self.adapt(e);
        }
    }
}

/// Kinds the agent can be asked to apply (everything but GCS-side ones).
pub fn routable(kind: DirectiveKind) -> bool {
    !matches!(
        kind,
        DirectiveKind::ConfirmDetection
            | DirectiveKind::RejectDetection
            | DirectiveKind::RestoreAutonomy
    )
}
