//! Ground-control station: mission specs, the runtime-model service, the
//! event log and replay.

mod log;
mod service;
mod spec;
mod trace;

pub use log::{
    parse_log, replay, replay_file, replay_records, EventLogRecord, EventLogWriter, LogError,
    MissionHeader, ReplayError, ReplayResult, Replayer, MISSION_TOPIC, RECORDER,
};
pub use service::{
    Frame, GcsError, GcsService, GcsSnapshot, SessionFrame, TrustMirror, ViewFrame, GCS_SENDER,
    GCS_SUBSCRIPTIONS,
};
pub use spec::{
    load_mission, MissionError, MissionSpec, ValidatedMission, ValidationIssue, ViewSpec,
    DEFAULT_TELEMETRY_MS, DEFAULT_TIME_CAP_MS, DEFAULT_UI_REFRESH_MS, RESERVED_VIEWS,
};
pub use trace::{
    traceability, traceability_complete, traceability_markdown, Consumer, RefreshEntry,
    RefreshPlan, ServiceTrace, TeamingFactor,
};
