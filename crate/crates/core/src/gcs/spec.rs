//! Mission specification files and their safety checks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trace::RefreshPlan;
use crate::agent::{validate_onboard, Scene, StateKind, UavFragment};
use crate::bus::{
    validate_topic, ClockMode, Millis, ServiceClass, ServiceClasses, DEFAULT_PAYLOAD_CAP,
    DEFAULT_TICK_MS,
};
use crate::coord::CoordParams;
use crate::geo::{check_simple_polygon, polygon_contains, GeoPoint};
use crate::triage::{AlertRule, ResponsivenessConfig};

pub const DEFAULT_UI_REFRESH_MS: Millis = 200;
pub const DEFAULT_TELEMETRY_MS: Millis = 200;
pub const DEFAULT_TIME_CAP_MS: Millis = 30 * 60 * 1000;

/// View names that collide with fixed GCS topics under `gcs/alerts/`.
pub const RESERVED_VIEWS: [&str; 2] = ["rules", "explanations"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub view: String,
    pub max_threshold: usize,
}

fn default_tick() -> Millis {
    DEFAULT_TICK_MS
}
fn default_refresh() -> Millis {
    DEFAULT_UI_REFRESH_MS
}
fn default_telemetry() -> Millis {
    DEFAULT_TELEMETRY_MS
}
fn default_cap() -> Millis {
    DEFAULT_TIME_CAP_MS
}
fn default_payload_cap() -> usize {
    DEFAULT_PAYLOAD_CAP
}
fn default_classes() -> Vec<ServiceClass> {
    ServiceClasses::default().iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_tick")]
    pub tick_ms: Millis,
    pub origin: GeoPoint,
    pub search_area: Vec<GeoPoint>,
    pub uavs: Vec<UavFragment>,
    /// Ground truth; only the harness and the simulated sensors read it.
    #[serde(default)]
    pub scene: Scene,
    pub views: Vec<ViewSpec>,
    #[serde(default)]
    pub rules: Vec<AlertRule>,
    #[serde(default = "default_classes")]
    pub service_classes: Vec<ServiceClass>,
    #[serde(default)]
    pub coordination: CoordParams,
    #[serde(default)]
    pub responsiveness: ResponsivenessConfig,
    #[serde(default = "default_refresh")]
    pub ui_refresh_ms: Millis,
    #[serde(default = "default_telemetry")]
    pub telemetry_ms: Millis,
    #[serde(default = "default_cap")]
    pub time_cap_ms: Millis,
    #[serde(default = "default_payload_cap")]
    pub payload_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_plan: Option<RefreshPlan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("cannot read mission file: {0}")]
    Io(#[from] std::io::Error),
    #[error("mission file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("mission failed validation:\n{}", format_issues(.0))]
    Invalid(Vec<ValidationIssue>),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A spec that passed validation, with non-fatal findings.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedMission {
    pub spec: MissionSpec,
    pub warnings: Vec<ValidationIssue>,
}

struct Issues {
    errors: Vec<ValidationIssue>,
    warnings: Vec<ValidationIssue>,
}

impl Issues {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl MissionSpec {
    pub fn from_json(text: &str) -> Result<Self, MissionError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn view_names(&self) -> impl Iterator<Item = &str> {
        self.views.iter().map(|v| v.view.as_str())
    }

    /// Runs every check and reports all violations with field paths.
    pub fn validate(self, clock: ClockMode) -> Result<ValidatedMission, MissionError> {
        let mut is = Issues {
            errors: Vec::new(),
            warnings: Vec::new(),
        };
        self.check_top(clock, &mut is);
        self.check_uavs(&mut is);
        self.check_views_and_rules(&mut is);
        self.check_scene(&mut is);
        if is.errors.is_empty() {
            Ok(ValidatedMission {
                spec: self,
                warnings: is.warnings,
            })
        } else {
            Err(MissionError::Invalid(is.errors))
        }
    }

    fn check_top(&self, clock: ClockMode, is: &mut Issues) {
        if self.name.trim().is_empty() {
            is.error("name", "must not be empty");
        }
        if clock == ClockMode::Lockstep && self.seed.is_none() {
            is.error("seed", "required in lockstep mode");
        }
        if self.tick_ms == 0 {
            is.error("tick_ms", "must be positive");
        }
        if self.ui_refresh_ms == 0
            || (self.tick_ms > 0 && !self.ui_refresh_ms.is_multiple_of(self.tick_ms))
        {
            is.error("ui_refresh_ms", "must be a positive multiple of tick_ms");
        }
        if self.telemetry_ms == 0
            || (self.tick_ms > 0 && !self.telemetry_ms.is_multiple_of(self.tick_ms))
        {
            is.error("telemetry_ms", "must be a positive multiple of tick_ms");
        }
        if self.time_cap_ms == 0 {
            is.error("time_cap_ms", "must be positive");
        }
        if let Err(e) = check_simple_polygon(&self.search_area) {
            is.error("search_area", format!("not a simple polygon: {e:?}"));
        }
        if let Err(e) = ServiceClasses::new(self.service_classes.iter().copied()) {
            is.error("service_classes", e.to_string());
        }
        let names: BTreeSet<_> = self.service_classes.iter().map(|c| c.name).collect();
        if names.len() != 2 {
            is.error(
                "service_classes",
                "both critical and standard must be registered exactly once",
            );
        }
        let c = &self.coordination;
        if c.waiting_period_ms == 0 {
            is.error("coordination.waiting_period_ms", "must be positive");
        }
        if c.tug_k == 0 {
            is.error("coordination.tug_k", "must be at least 1");
        }
        if c.tug_window_ms == 0 {
            is.error("coordination.tug_window_ms", "must be positive");
        }
        if !self.responsiveness.is_valid() {
            is.error(
                "responsiveness",
                "recovery_ms must be below lag_ms and window positive",
            );
        }
        if let Some(plan) = &self.refresh_plan {
            for (path, msg) in plan.violations() {
                is.error(format!("refresh_plan.{path}"), msg);
            }
        }
    }

    fn check_uavs(&self, is: &mut Issues) {
        if self.uavs.is_empty() {
            is.error("uavs", "at least one UAV is required");
        }
        let mut ids = BTreeMap::new();
        let mut colors = BTreeMap::new();
        let area_ok = check_simple_polygon(&self.search_area).is_ok();
        for (i, u) in self.uavs.iter().enumerate() {
            let at = |f: &str| format!("uavs[{i}].{f}");
            if u.id.is_empty() || validate_topic(&u.id).is_err() || u.id.contains('/') {
                is.error(at("id"), "must be a single non-empty topic segment");
            }
            if let Some(prev) = ids.insert(u.id.clone(), i) {
                is.error(at("id"), format!("duplicates uavs[{prev}].id"));
            }
            if let Some(prev) = colors.insert(u.color.clone(), i) {
                is.error(at("color"), format!("duplicates uavs[{prev}].color"));
            }
            if let Err(e) = u.thresholds.validate() {
                is.error(at("thresholds"), e.to_string());
            }
            let f = &u.flight;
            if f.speed_mps <= 0.0 || f.climb_mps <= 0.0 {
                is.error(at("flight"), "speed and climb rate must be positive");
            }
            if !(f.min_altitude_m > 0.0
                && f.min_altitude_m <= f.cruise_altitude_m
                && f.cruise_altitude_m <= f.max_altitude_m)
            {
                is.error(
                    at("flight"),
                    "altitudes must satisfy 0 < min ≤ cruise ≤ max",
                );
            }
            if !(0.0..=100.0).contains(&f.battery_pct)
                || !(0.0..100.0).contains(&f.failsafe_floor_pct)
            {
                is.error(at("flight"), "battery percentages must lie in [0, 100]");
            }
            match validate_onboard(&u.machine) {
                Ok(m) => {
                    let unreachable = m.unreachable_states();
                    if !unreachable.is_empty() {
                        is.warn(at("machine"), format!("unreachable states {unreachable:?}"));
                    }
                    let roams = m.states().iter().any(|s| {
                        s == StateKind::Searching.as_str() || s == StateKind::Surveillance.as_str()
                    });
                    if roams && u.route.is_empty() {
                        is.error(at("route"), "search and surveillance machines need a route");
                    }
                }
                Err(e) => is.error(at("machine"), e.to_string()),
            }
            if area_ok {
                for (j, p) in u.route.iter().enumerate() {
                    if !polygon_contains(&self.search_area, *p) {
                        is.error(format!("uavs[{i}].route[{j}]"), "outside the search area");
                    }
                }
            }
        }
    }

    fn check_views_and_rules(&self, is: &mut Issues) {
        let mut views = BTreeSet::new();
        for (i, v) in self.views.iter().enumerate() {
            if v.view.is_empty()
                || v.view.contains('/')
                || v.view.contains('+')
                || v.view.contains('#')
            {
                is.error(format!("views[{i}].view"), "must be a single topic segment");
            }
            if RESERVED_VIEWS.contains(&v.view.as_str()) {
                is.error(
                    format!("views[{i}].view"),
                    format!("`{}` is reserved", v.view),
                );
            }
            if !views.insert(v.view.as_str()) {
                is.error(format!("views[{i}].view"), "registered twice");
            }
        }
        let mut seen = BTreeMap::new();
        for (i, r) in self.rules.iter().enumerate() {
            if !views.contains(r.view.as_str()) {
                is.error(
                    format!("rules[{i}].view"),
                    format!("unknown view `{}`", r.view),
                );
            }
            if let Some(prev) = seen.insert((r.alert_type.as_str(), r.view.as_str()), i) {
                is.error(
                    format!("rules[{i}]"),
                    format!("duplicates rules[{prev}] for {}/{}", r.alert_type, r.view),
                );
            }
        }
    }

    fn check_scene(&self, is: &mut Issues) {
        let ids: BTreeSet<&str> = self.uavs.iter().map(|u| u.id.as_str()).collect();
        for (i, h) in self.scene.hazards.iter().enumerate() {
            if !ids.contains(h.uav.as_str()) {
                is.error(
                    format!("scene.hazards[{i}].uav"),
                    format!("unknown UAV `{}`", h.uav),
                );
            }
            if h.period_ms == 0 || h.until_ms < h.from_ms {
                is.error(
                    format!("scene.hazards[{i}]"),
                    "needs a positive period and from ≤ until",
                );
            }
        }
    }
}

/// Reads, parses and validates a mission file.
pub fn load_mission(
    path: impl AsRef<Path>,
    clock: ClockMode,
) -> Result<ValidatedMission, MissionError> {
    let text = std::fs::read_to_string(path)?;
    MissionSpec::from_json(&text)?.validate(clock)
}
