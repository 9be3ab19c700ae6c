//! JSON messages on the console socket and the mission metadata document.

use std::sync::Arc;

use hmt_core::agent::MachineSpec;
use hmt_core::bus::{ClockMode, Millis};
use hmt_core::gcs::{traceability, Frame, MissionSpec, ServiceTrace, ViewSpec};
use hmt_core::geo::GeoPoint;
use hmt_core::message::{CommandResult, ConsoleCommand};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame {
        frame: Arc<Frame>,
    },
    CommandResult {
        result: CommandResult,
    },
    /// The client sent something that is not a valid message.
    Error {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command(ConsoleCommand),
    Pause,
    Resume,
    Abort,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavMetadata {
    pub id: String,
    pub color: String,
    pub machine: MachineSpec,
    pub home: GeoPoint,
    pub route: Vec<GeoPoint>,
}

/// What the console needs before the first frame: layout, machines and views.
#[derive(Clone, Debug, Serialize)]
pub struct MissionMetadata {
    pub name: String,
    pub seed: u64,
    pub clock: ClockMode,
    pub tick_ms: Millis,
    pub ui_refresh_ms: Millis,
    pub waiting_period_ms: Millis,
    pub origin: GeoPoint,
    pub search_area: Vec<GeoPoint>,
    pub uavs: Vec<UavMetadata>,
    pub views: Vec<ViewSpec>,
    pub traceability: Vec<ServiceTrace>,
}

impl MissionMetadata {
    pub fn new(spec: &MissionSpec, seed: u64, clock: ClockMode) -> Self {
        MissionMetadata {
            name: spec.name.clone(),
            seed,
            clock,
            tick_ms: spec.tick_ms,
            ui_refresh_ms: spec.ui_refresh_ms,
            waiting_period_ms: spec.coordination.waiting_period_ms,
            origin: spec.origin,
            search_area: spec.search_area.clone(),
            uavs: spec
                .uavs
                .iter()
                .map(|u| UavMetadata {
                    id: u.id.clone(),
                    color: u.color.clone(),
                    machine: u.machine.clone(),
                    home: u.home,
                    route: u.route.clone(),
                })
                .collect(),
            views: spec.views.clone(),
            traceability: traceability(),
        }
    }
}
