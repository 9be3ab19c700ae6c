//! Headless mission driver, scripted humans and log-derived run metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::watch;

use crate::agent::{AgentError, DetectionDecision, DetectionEvent, ObjectKind, Scene, UavAgent};
use crate::bus::{
    Bus, BusConfig, BusError, Clock, ClockMode, Delivery, Millis, QosClass, ServiceClasses,
};
use crate::coord::{Decision, DirectiveAction, HumanDirective};
use crate::gcs::{
    parse_log, EventLogWriter, Frame, GcsError, GcsService, GcsSnapshot, LogError, MissionHeader,
    MissionSpec, ReplayError, ValidationIssue, GCS_SENDER, GCS_SUBSCRIPTIONS, RECORDER,
};
use crate::geo::Projection;
use crate::message::{
    topics, CommandBody, CommandResult, ConsoleCommand, GcsNote, MissionFooter, NoteKind, Outgoing,
    Payload, SessionEvent,
};
use crate::triage::AlertRule;

pub const LOGGER: &str = "logger";
pub const HUMAN_SENDER: &str = "human";
pub const CONSOLE_SENDER: &str = "console";

/// Sightings within this distance of a victim count as true detections.
pub const TRUTH_RADIUS_M: f64 = 15.0;

const DRAIN_LIMIT_TICKS: u64 = 5_000;
const RESERVED_NAMES: [&str; 5] = [LOGGER, GCS_SENDER, HUMAN_SENDER, CONSOLE_SENDER, RECORDER];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Gcs(#[from] GcsError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("UAV id `{0}` collides with a built-in participant")]
    ReservedName(String),
    #[error("mission is already running")]
    AlreadyRunning,
    #[error("no mission is running")]
    NotRunning,
    #[error("human script is invalid: {0:?}")]
    InvalidScript(Vec<ValidationIssue>),
    #[error("cannot read human script: {0}")]
    ScriptIo(#[from] std::io::Error),
    #[error("human script does not parse: {0}")]
    ScriptParse(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseDelay {
    Fixed { ms: Millis },
    Uniform { min_ms: Millis, max_ms: Millis },
}

impl ResponseDelay {
    pub fn bounds(self) -> (Millis, Millis) {
        match self {
            ResponseDelay::Fixed { ms } => (ms, ms),
            ResponseDelay::Uniform { min_ms, max_ms } => (min_ms, max_ms),
        }
    }

    fn draw(self, rng: &mut ChaCha8Rng) -> Millis {
        match self {
            ResponseDelay::Fixed { ms } => ms,
            ResponseDelay::Uniform { min_ms, max_ms } => rng.gen_range(min_ms..=max_ms),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DecisionPolicy {
    AlwaysConfirm,
    AlwaysReject,
    /// Answers correctly with probability `accuracy`.
    GroundTruthOracle {
        accuracy: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledDirective {
    pub at_ms: Millis,
    pub target: String,
    #[serde(flatten)]
    pub action: DirectiveAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledRule {
    pub at_ms: Millis,
    pub rule: AlertRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanScript {
    /// Chance the human answers any one prompt.
    pub availability: f64,
    pub response_delay: ResponseDelay,
    pub decision_policy: DecisionPolicy,
    pub directives: Vec<ScheduledDirective>,
    pub rule_updates: Vec<ScheduledRule>,
}

impl Default for HumanScript {
    fn default() -> Self {
        HumanScript {
            availability: 1.0,
            response_delay: ResponseDelay::Fixed { ms: 2_000 },
            decision_policy: DecisionPolicy::AlwaysConfirm,
            directives: Vec::new(),
            rule_updates: Vec::new(),
        }
    }
}

impl HumanScript {
    pub fn with_policy(policy: DecisionPolicy) -> Self {
        HumanScript {
            decision_policy: policy,
            ..HumanScript::default()
        }
    }

    pub fn unavailable() -> Self {
        HumanScript {
            availability: 0.0,
            ..HumanScript::default()
        }
    }

    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        let mut err = |path: &str, message: &str| {
            out.push(ValidationIssue {
                path: path.into(),
                message: message.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.availability) {
            err("availability", "must lie in [0, 1]");
        }
        if let ResponseDelay::Uniform { min_ms, max_ms } = self.response_delay {
            if min_ms > max_ms {
                err("response_delay", "min_ms must not exceed max_ms");
            }
        }
        if let DecisionPolicy::GroundTruthOracle { accuracy } = self.decision_policy {
            if !(0.0..=1.0).contains(&accuracy) {
                err("decision_policy.accuracy", "must lie in [0, 1]");
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: HumanScript = serde_json::from_str(text)?;
        let issues = s.validate();
        if issues.is_empty() {
            Ok(s)
        } else {
            Err(HarnessError::InvalidScript(issues))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        HumanScript::from_json(&std::fs::read_to_string(path)?)
    }
}

/// True when a sighting lies within [`TRUTH_RADIUS_M`] of a victim.
pub fn is_true_sighting(scene: &Scene, proj: &Projection, d: &DetectionEvent) -> bool {
    let p = proj.to_local(d.location);
    scene.objects.iter().any(|o| {
        o.kind == ObjectKind::Victim && proj.to_local(o.location).distance(p) <= TRUTH_RADIUS_M
    })
}

/// A human that only sees frames and answers through console commands.
#[derive(Clone, Debug)]
pub struct ScriptedHuman {
    script: HumanScript,
    rng: ChaCha8Rng,
    scene: Scene,
    proj: Projection,
    seen: BTreeSet<u64>,
    pending: Vec<(Millis, u64, Decision)>,
    next_directive: usize,
    next_rule: usize,
    next_id: u64,
}

impl ScriptedHuman {
    pub fn new(mut script: HumanScript, scene: Scene, proj: Projection, rng: ChaCha8Rng) -> Self {
        script.directives.sort_by_key(|d| d.at_ms);
        script.rule_updates.sort_by_key(|r| r.at_ms);
        ScriptedHuman {
            script,
            rng,
            scene,
            proj,
            seen: BTreeSet::new(),
            pending: Vec::new(),
            next_directive: 0,
            next_rule: 0,
            next_id: 1,
        }
    }

    fn decide(&mut self, d: &DetectionEvent) -> Decision {
        match self.script.decision_policy {
            DecisionPolicy::AlwaysConfirm => Decision::Confirm,
            DecisionPolicy::AlwaysReject => Decision::Reject,
            DecisionPolicy::GroundTruthOracle { accuracy } => {
                let truth = is_true_sighting(&self.scene, &self.proj, d);
                let correct = self.rng.gen_bool(accuracy);
                match (truth, correct) {
                    (true, true) | (false, false) => Decision::Confirm,
                    _ => Decision::Reject,
                }
            }
        }
    }

    /// Reads a frame and plans answers to sessions it has not seen yet.
    pub fn observe(&mut self, frame: &Frame) {
        for s in &frame.sessions {
            if !self.seen.insert(s.session) {
                continue;
            }
            if !self.rng.gen_bool(self.script.availability) {
                continue;
            }
            let delay = self.script.response_delay.draw(&mut self.rng);
            let decision = self.decide(&s.detection);
            self.pending.push((frame.at + delay, s.session, decision));
        }
    }

    fn command(&mut self, version: u64, command: CommandBody) -> ConsoleCommand {
        let id = self.next_id;
        self.next_id += 1;
        ConsoleCommand {
            id,
            version,
            command,
        }
    }

    /// Commands due at `now`, stamped with the version of the frame last seen.
    pub fn due(&mut self, now: Millis, frame: &Frame) -> Vec<ConsoleCommand> {
        let mut out = Vec::new();
        let (due, later): (Vec<_>, Vec<_>) =
            self.pending.drain(..).partition(|(t, _, _)| *t <= now);
        self.pending = later;
        for (_, session, decision) in due {
            out.push(self.command(frame.version, CommandBody::Resolve { session, decision }));
        }
        while let Some(d) = self
            .script
            .directives
            .get(self.next_directive)
            .filter(|d| d.at_ms <= now)
            .cloned()
        {
            self.next_directive += 1;
            let directive = HumanDirective::new(&d.target, now, d.action);
            out.push(self.command(frame.version, CommandBody::Directive { directive }));
        }
        while let Some(r) = self
            .script
            .rule_updates
            .get(self.next_rule)
            .filter(|r| r.at_ms <= now)
            .cloned()
        {
            self.next_rule += 1;
            out.push(self.command(frame.version, CommandBody::UpdateRule { rule: r.rule }));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Running,
    Paused,
    Finished,
}

/// Topic and class for a console command.
pub fn command_route(c: &ConsoleCommand) -> (&'static str, QosClass) {
    match &c.command {
        CommandBody::Resolve { .. } => (topics::HUMAN_RESPONSE, QosClass::Critical),
        CommandBody::Directive { directive } => match directive.action {
            DirectiveAction::ConfirmDetection { .. } | DirectiveAction::RejectDetection { .. } => {
                (topics::HUMAN_RESPONSE, QosClass::Critical)
            }
            _ if directive.is_rc() => (topics::HUMAN_DIRECTIVE, QosClass::Critical),
            _ => (topics::HUMAN_DIRECTIVE, QosClass::Standard),
        },
        CommandBody::DismissAlert { .. } | CommandBody::UpdateRule { .. } => {
            (topics::HUMAN_DIRECTIVE, QosClass::Standard)
        }
    }
}

/// One mission: the bus, the agents, the GCS, the logger and an optional scripted human.
pub struct Mission {
    spec: MissionSpec,
    seed: u64,
    bus: Bus,
    agents: Vec<UavAgent>,
    agent_index: BTreeMap<String, usize>,
    gcs: GcsService,
    human: Option<ScriptedHuman>,
    log: EventLogWriter,
    status: Lifecycle,
    aborted: bool,
    complete: bool,
    frame_tx: watch::Sender<Arc<Frame>>,
    latest: Arc<Frame>,
    next_frame_at: Millis,
    results: Vec<CommandResult>,
}

impl Mission {
    /// Wires agents, models, bus and log, and writes the log header.
    pub fn start(
        spec: MissionSpec,
        seed: u64,
        clock: ClockMode,
        script: Option<HumanScript>,
        log: EventLogWriter,
    ) -> Result<Self, HarnessError> {
        for u in &spec.uavs {
            if RESERVED_NAMES.contains(&u.id.as_str()) {
                return Err(HarnessError::ReservedName(u.id.clone()));
            }
        }
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let classes = ServiceClasses::new(spec.service_classes.iter().copied())?;
        let mut bus = Bus::new(BusConfig {
            classes,
            clock: Clock::new(clock, spec.tick_ms),
            payload_cap: spec.payload_cap,
            seed: master.gen(),
        });
        let proj = Projection::new(spec.origin);

        let mut agents = Vec::with_capacity(spec.uavs.len());
        for u in &spec.uavs {
            let mut a = UavAgent::instantiate(u, proj, ChaCha8Rng::seed_from_u64(master.gen()))?;
            a.set_telemetry_interval(spec.telemetry_ms);
            agents.push(a);
        }
        agents.sort_by(|a, b| a.name().cmp(b.name()));
        let agent_index = agents
            .iter()
            .enumerate()
            .map(|(i, a)| (a.name().to_string(), i))
            .collect();

        bus.subscribe("#", LOGGER)?;
        for p in GCS_SUBSCRIPTIONS {
            bus.subscribe(p, GCS_SENDER)?;
        }
        for a in &agents {
            for t in a.subscriptions() {
                bus.subscribe(&t, a.name())?;
            }
        }

        let human_rng = ChaCha8Rng::seed_from_u64(master.gen());
        let human = script
            .clone()
            .map(|s| ScriptedHuman::new(s, spec.scene.clone(), proj, human_rng));
        let gcs = GcsService::new(&spec)?;
        let latest = Arc::new(gcs.frame(0));
        let (frame_tx, _) = watch::channel(Arc::clone(&latest));

        let mut log = log;
        let script_value = script.map(|s| serde_json::to_value(s).expect("script serializes"));
        log.header(MissionHeader {
            spec: spec.clone(),
            seed,
            clock,
            human_script: script_value,
        })?;

        let mut m = Mission {
            next_frame_at: spec.ui_refresh_ms,
            spec,
            seed,
            bus,
            agents,
            agent_index,
            gcs,
            human,
            log,
            status: Lifecycle::Running,
            aborted: false,
            complete: false,
            frame_tx,
            latest,
            results: Vec::new(),
        };
        m.send_note(
            NoteKind::MissionStarted,
            format!("mission `{}` started with seed {seed}", m.spec.name),
        )?;
        Ok(m)
    }

    pub fn spec(&self) -> &MissionSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> Millis {
        self.bus.now()
    }

    pub fn status(&self) -> Lifecycle {
        self.status
    }

    pub fn gcs(&self) -> &GcsService {
        &self.gcs
    }

    pub fn agents(&self) -> &[UavAgent] {
        &self.agents
    }

    pub fn agent(&self, name: &str) -> Option<&UavAgent> {
        self.agent_index.get(name).map(|&i| &self.agents[i])
    }

    pub fn log(&self) -> &EventLogWriter {
        &self.log
    }

    pub fn latest_frame(&self) -> Arc<Frame> {
        Arc::clone(&self.latest)
    }

    /// Latest-wins frame stream; slow readers only ever see the newest frame.
    pub fn subscribe_frames(&self) -> watch::Receiver<Arc<Frame>> {
        self.frame_tx.subscribe()
    }

    pub fn take_results(&mut self) -> Vec<CommandResult> {
        std::mem::take(&mut self.results)
    }

    fn send_note(&mut self, kind: NoteKind, detail: String) -> Result<(), HarnessError> {
        let n = GcsNote {
            kind,
            uav: None,
            session: None,
            detail,
            at: self.bus.now(),
        };
        self.bus.send(
            GCS_SENDER,
            topics::GCS_LOG,
            QosClass::Standard,
            Payload::Note(n),
        )?;
        Ok(())
    }

    pub fn pause(&mut self) -> Result<(), HarnessError> {
        if self.status != Lifecycle::Running {
            return Err(HarnessError::NotRunning);
        }
        self.status = Lifecycle::Paused;
        self.send_note(NoteKind::MissionPaused, "mission paused".into())
    }

    pub fn resume(&mut self) -> Result<(), HarnessError> {
        if self.status != Lifecycle::Paused {
            return Err(HarnessError::NotRunning);
        }
        self.status = Lifecycle::Running;
        self.send_note(NoteKind::MissionResumed, "mission resumed".into())
    }

    /// Sends every UAV home. The mission keeps running until they are down.
    pub fn abort(&mut self) -> Result<(), HarnessError> {
        if self.status == Lifecycle::Finished {
            return Err(HarnessError::NotRunning);
        }
        self.aborted = true;
        self.status = Lifecycle::Running;
        self.gcs.abort(self.bus.now());
        self.flush_gcs()
    }

    /// Queues an operator command on the bus. The outcome arrives later as a `CommandResult`.
    pub fn submit(&mut self, sender: &str, c: ConsoleCommand) -> Result<(), HarnessError> {
        let (topic, qos) = command_route(&c);
        self.bus.send(sender, topic, qos, Payload::Command(c))?;
        Ok(())
    }

    fn publish(&mut self, sender: &str, outs: Vec<Outgoing>) -> Result<(), HarnessError> {
        for o in outs {
            self.bus.send(sender, o.topic, o.qos, o.payload)?;
        }
        Ok(())
    }

    fn flush_gcs(&mut self) -> Result<(), HarnessError> {
        let outs = self.gcs.take_outbox();
        self.publish(GCS_SENDER, outs)?;
        self.results.extend(self.gcs.take_results());
        Ok(())
    }

    fn dispatch(&mut self, deliveries: Vec<Delivery>) -> Result<(), HarnessError> {
        let now = self.bus.now();
        for d in deliveries {
            match d.subscriber.as_str() {
                LOGGER => {
                    self.log.record(d.at, (*d.envelope).clone())?;
                }
                GCS_SENDER => self.gcs.ingest(&d.envelope, d.at),
                name => {
                    if let Some(&i) = self.agent_index.get(name) {
                        self.agents[i].receive(&d.envelope, now);
                    }
                }
            }
        }
        self.flush_gcs()
    }

    /// One lockstep tick. Returns false once the mission has finished.
    pub fn step(&mut self) -> Result<bool, HarnessError> {
        if self.status == Lifecycle::Finished {
            return Ok(false);
        }
        if self.status == Lifecycle::Paused {
            return Ok(true);
        }
        let deliveries = self.bus.advance(1)?;
        self.after_clock(deliveries)
    }

    /// Realtime counterpart of `step`: moves the clock to `now` (simulated ms since start).
    pub fn step_realtime(&mut self, now: Millis) -> Result<bool, HarnessError> {
        if self.status == Lifecycle::Finished {
            return Ok(false);
        }
        if self.status == Lifecycle::Paused {
            return Ok(true);
        }
        let deliveries = self.bus.sync_to(now)?;
        self.after_clock(deliveries)
    }

    fn after_clock(&mut self, deliveries: Vec<Delivery>) -> Result<bool, HarnessError> {
        self.dispatch(deliveries)?;
        let now = self.bus.now();
        for i in 0..self.agents.len() {
            let outs = self.agents[i].step(now, &self.spec.scene);
            let name = self.agents[i].name().to_string();
            self.publish(&name, outs)?;
        }
        self.gcs.tick(now);
        self.flush_gcs()?;

        if now >= self.next_frame_at {
            while self.next_frame_at <= now {
                self.next_frame_at += self.spec.ui_refresh_ms;
            }
            self.latest = Arc::new(self.gcs.frame(now));
            self.frame_tx.send_replace(Arc::clone(&self.latest));
            if let Some(h) = self.human.as_mut() {
                h.observe(&self.latest);
            }
        }
        if let Some(h) = self.human.as_mut() {
            let commands = h.due(now, &self.latest);
            for c in commands {
                self.submit(HUMAN_SENDER, c)?;
            }
        }

        let at_rest = self.agents.iter().all(UavAgent::at_rest) && !self.gcs.has_open_sessions();
        if at_rest || now >= self.spec.time_cap_ms {
            self.finish(at_rest)?;
            return Ok(false);
        }
        Ok(true)
    }

    /// Delivers what is still in flight, then writes the footer.
    fn finish(&mut self, complete: bool) -> Result<(), HarnessError> {
        let mut ticks = 0;
        while self.bus.pending() > 0 && ticks < DRAIN_LIMIT_TICKS {
            let deliveries = match self.bus.clock().mode {
                ClockMode::Lockstep => self.bus.advance(1)?,
                ClockMode::Realtime => {
                    let next = self.bus.now() + self.spec.tick_ms;
                    self.bus.sync_to(next)?
                }
            };
            self.dispatch(deliveries)?;
            self.gcs.tick(self.bus.now());
            self.flush_gcs()?;
            ticks += 1;
        }
        let now = self.bus.now();
        self.complete = complete;
        self.log.footer(MissionFooter {
            at: now,
            complete,
            aborted: self.aborted,
        })?;
        self.latest = Arc::new(self.gcs.frame(now));
        self.frame_tx.send_replace(Arc::clone(&self.latest));
        self.status = Lifecycle::Finished;
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Steps until the mission ends, handing each new frame to `on_frame`.
    pub fn run_to_end(&mut self, mut on_frame: impl FnMut(&Frame)) -> Result<(), HarnessError> {
        let mut last = self.latest.version;
        let mut last_at = self.latest.at;
        while self.step()? {
            if self.latest.at != last_at || self.latest.version != last {
                last = self.latest.version;
                last_at = self.latest.at;
                on_frame(&self.latest);
            }
        }
        Ok(())
    }
}

/// Holds at most one mission at a time.
#[derive(Default)]
pub struct MissionHost {
    mission: Option<Mission>,
}

impl MissionHost {
    pub fn start(
        &mut self,
        spec: MissionSpec,
        seed: u64,
        clock: ClockMode,
        script: Option<HumanScript>,
        log: EventLogWriter,
    ) -> Result<&mut Mission, HarnessError> {
        if self
            .mission
            .as_ref()
            .is_some_and(|m| m.status() != Lifecycle::Finished)
        {
            return Err(HarnessError::AlreadyRunning);
        }
        Ok(self
            .mission
            .insert(Mission::start(spec, seed, clock, script, log)?))
    }

    pub fn mission(&mut self) -> Option<&mut Mission> {
        self.mission.as_mut()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub detections_true: u64,
    pub detections_false: u64,
    pub sessions_opened: u64,
    pub sessions_confirmed: u64,
    pub sessions_refuted: u64,
    pub sessions_timed_out: u64,
    pub mean_response_ms: Option<f64>,
    pub alerts_displayed: BTreeMap<String, u64>,
    pub alerts_suppressed: BTreeMap<String, u64>,
    pub adaptations: u64,
    pub explanations: u64,
    pub tug_of_war_conflicts: u64,
    pub human_failures_to_respond: u64,
    pub stale_actions: u64,
    pub rule_changes_machine: u64,
    pub rule_changes_human: u64,
    pub mission_duration_ms: Millis,
    pub complete: bool,
    pub aborted: bool,
}

impl RunMetrics {
    /// Derives every metric from the log text alone.
    pub fn from_log(text: &str) -> Result<Self, ReplayError> {
        let records = parse_log(text)?;
        let mut m = RunMetrics::default();
        let mut scene = None;
        let mut opened: BTreeMap<u64, Millis> = BTreeMap::new();
        let mut latencies = Vec::new();
        let mut shown: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
        let mut hidden: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
        for r in &records {
            match &r.envelope.payload {
                Payload::Header(h) => {
                    scene = Some((h.spec.scene.clone(), Projection::new(h.spec.origin)))
                }
                Payload::Detection(d)
                    if !d.reverted && d.decision != DetectionDecision::ContinueSearch =>
                {
                    let truth = scene
                        .as_ref()
                        .is_some_and(|(s, p)| is_true_sighting(s, p, &d.detection));
                    if truth {
                        m.detections_true += 1;
                    } else {
                        m.detections_false += 1;
                    }
                }
                Payload::Session(s) => match s.event {
                    SessionEvent::HelpRequested => {
                        m.sessions_opened += 1;
                        opened.insert(s.session, s.at);
                    }
                    SessionEvent::Confirmation | SessionEvent::Refutation => {
                        if s.event == SessionEvent::Confirmation {
                            m.sessions_confirmed += 1;
                        } else {
                            m.sessions_refuted += 1;
                        }
                        if let Some(o) = opened.get(&s.session) {
                            latencies.push((s.at - o) as f64);
                        }
                    }
                    SessionEvent::NoResponse => m.sessions_timed_out += 1,
                },
                Payload::Triage(t) => {
                    // Change lists also report removals, so read the resulting sets instead.
                    shown
                        .entry(t.view.clone())
                        .or_default()
                        .extend(t.displayed.iter().copied());
                    hidden
                        .entry(t.view.clone())
                        .or_default()
                        .extend(t.suppressed.iter().copied());
                }
                Payload::Adaptation(_) => m.adaptations += 1,
                Payload::Explanation(_) => m.explanations += 1,
                Payload::Note(n) => match n.kind {
                    NoteKind::TugOfWar => m.tug_of_war_conflicts += 1,
                    NoteKind::HumanFailureToRespond => m.human_failures_to_respond += 1,
                    NoteKind::StaleAction => m.stale_actions += 1,
                    _ => {}
                },
                Payload::RuleChange(rc) => match rc.origin {
                    crate::adaptation::Initiator::Machine => m.rule_changes_machine += 1,
                    crate::adaptation::Initiator::Human => m.rule_changes_human += 1,
                },
                Payload::Footer(f) => {
                    m.mission_duration_ms = f.at;
                    m.complete = f.complete;
                    m.aborted = f.aborted;
                }
                _ => {}
            }
        }
        if !latencies.is_empty() {
            m.mean_response_ms = Some(latencies.iter().sum::<f64>() / latencies.len() as f64);
        }
        m.alerts_displayed = shown
            .into_iter()
            .map(|(v, s)| (v, s.len() as u64))
            .collect();
        m.alerts_suppressed = hidden
            .into_iter()
            .map(|(v, s)| (v, s.len() as u64))
            .collect();
        Ok(m)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub log: String,
    pub final_state: GcsSnapshot,
    pub final_frame: Arc<Frame>,
}

/// Runs a lockstep mission to its end or the time cap.
pub fn run_scenario(
    spec: &MissionSpec,
    script: Option<HumanScript>,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    run_scenario_with(spec, script, seed, EventLogWriter::new(), |_| {})
}

pub fn run_scenario_with(
    spec: &MissionSpec,
    script: Option<HumanScript>,
    seed: u64,
    log: EventLogWriter,
    on_frame: impl FnMut(&Frame),
) -> Result<RunOutput, HarnessError> {
    let mut mission = Mission::start(spec.clone(), seed, ClockMode::Lockstep, script, log)?;
    mission.run_to_end(on_frame)?;
    let log = mission.log().text();
    let metrics = RunMetrics::from_log(&log)?;
    Ok(RunOutput {
        metrics,
        log,
        final_state: mission.gcs().snapshot(),
        final_frame: mission.latest_frame(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum LogComparison {
    Equal,
    /// First record that differs; `seq` is the record index.
    Diverged {
        seq: u64,
    },
}

/// Byte comparison, record by record.
pub fn compare_logs(a: &str, b: &str) -> LogComparison {
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut seq = 0;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return LogComparison::Equal,
            (x, y) if x != y => return LogComparison::Diverged { seq },
            _ => seq += 1,
        }
    }
}
