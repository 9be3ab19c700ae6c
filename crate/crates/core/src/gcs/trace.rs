//! Teaming-factor traceability and data refresh planning.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bus::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TeamingFactor {
    TF1,
    TF2,
    TF3,
    TF4,
    TF5,
    TF6,
    TF7,
    TF8,
}

impl TeamingFactor {
    pub const ALL: [TeamingFactor; 8] = [
        TeamingFactor::TF1,
        TeamingFactor::TF2,
        TeamingFactor::TF3,
        TeamingFactor::TF4,
        TeamingFactor::TF5,
        TeamingFactor::TF6,
        TeamingFactor::TF7,
        TeamingFactor::TF8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TeamingFactor::TF1 => "Observability",
            TeamingFactor::TF2 => "Predictability",
            TeamingFactor::TF3 => "Directing attention",
            TeamingFactor::TF4 => "Solution exploration",
            TeamingFactor::TF5 => "Adaptability",
            TeamingFactor::TF6 => "Directability",
            TeamingFactor::TF7 => "Calibrated trust",
            TeamingFactor::TF8 => "Common ground",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            TeamingFactor::TF1 => "The operator can see what each UAV is doing and how far its tasks have progressed.",
            TeamingFactor::TF2 => "The operator can anticipate what a UAV will do next from its state and recent choices.",
            TeamingFactor::TF3 => "The system steers the operator's attention to what matters now and holds back the rest.",
            TeamingFactor::TF4 => "The operator can look back through past states and decisions to weigh alternatives.",
            TeamingFactor::TF5 => "Either partner can change how the team works while the mission runs.",
            TeamingFactor::TF6 => "The operator can redirect a UAV's goals, resources and activities.",
            TeamingFactor::TF7 => "The system keeps a running measure of how often its judgments hold up, and acts on it.",
            TeamingFactor::TF8 => "Both partners share an understanding of why the machine changed its behavior.",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceTrace {
    pub service: &'static str,
    pub factors: Vec<TeamingFactor>,
}

/// Which runtime-model services serve which teaming factors.
pub fn traceability() -> Vec<ServiceTrace> {
    use TeamingFactor::*;
    vec![
        ServiceTrace {
            service: "fleet-model",
            factors: vec![TF1, TF2, TF4],
        },
        ServiceTrace {
            service: "alert-triage",
            factors: vec![TF3, TF5],
        },
        ServiceTrace {
            service: "explanation-engine",
            factors: vec![TF2, TF8],
        },
        ServiceTrace {
            service: "coordination-sessions",
            factors: vec![TF6, TF7],
        },
        ServiceTrace {
            service: "affordance-gating",
            factors: vec![TF4, TF6],
        },
        ServiceTrace {
            service: "tug-of-war-mitigation",
            factors: vec![TF5, TF6, TF8],
        },
        ServiceTrace {
            service: "event-log-replay",
            factors: vec![TF4],
        },
    ]
}

/// Markdown table of the traceability matrix.
pub fn traceability_markdown() -> String {
    let mut out = String::from("| Factor | Name | Definition | Served by |\n|---|---|---|---|\n");
    let traces = traceability();
    for tf in TeamingFactor::ALL {
        let served: Vec<&str> = traces
            .iter()
            .filter(|t| t.factors.contains(&tf))
            .map(|t| t.service)
            .collect();
        out.push_str(&format!(
            "| {tf:?} | {} | {} | {} |\n",
            tf.name(),
            tf.definition(),
            served.join(", ")
        ));
    }
    out
}

/// Every service claims at least one factor and every factor is claimed.
pub fn traceability_complete() -> bool {
    let traces = traceability();
    let claimed: BTreeSet<TeamingFactor> = traces
        .iter()
        .flat_map(|t| t.factors.iter().copied())
        .collect();
    traces.iter().all(|t| !t.factors.is_empty()) && claimed.len() == TeamingFactor::ALL.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consumer {
    pub model: String,
    /// Longest interval between updates the consumer tolerates.
    pub required_ms: Millis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshEntry {
    pub attribute: String,
    pub probe: String,
    pub interval_ms: Millis,
    pub consumers: Vec<Consumer>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshPlan {
    pub attributes: Vec<RefreshEntry>,
}

impl RefreshPlan {
    /// The plan the built-in probes follow.
    pub fn standard(tick_ms: Millis, telemetry_ms: Millis, ui_refresh_ms: Millis) -> Self {
        let c = |model: &str, required_ms| Consumer {
            model: model.into(),
            required_ms,
        };
        let e = |attribute: &str, probe: &str, interval_ms, consumers| RefreshEntry {
            attribute: attribute.into(),
            probe: probe.into(),
            interval_ms,
            consumers,
        };
        RefreshPlan {
            attributes: vec![
                e(
                    "position",
                    "uav telemetry",
                    telemetry_ms,
                    vec![c("map view", ui_refresh_ms)],
                ),
                e(
                    "battery",
                    "uav telemetry",
                    telemetry_ms,
                    vec![c("map view", ui_refresh_ms), c("alert-triage", 1_000)],
                ),
                e(
                    "task state",
                    "uav state report",
                    tick_ms,
                    vec![c("fleet-model", tick_ms), c("affordance-gating", tick_ms)],
                ),
                e(
                    "detections",
                    "onboard vision",
                    tick_ms,
                    vec![c("coordination-sessions", tick_ms)],
                ),
                e(
                    "adaptations",
                    "onboard planner",
                    tick_ms,
                    vec![
                        c("explanation-engine", tick_ms),
                        c("tug-of-war-mitigation", tick_ms),
                    ],
                ),
                e(
                    "operator frame",
                    "gcs frame stream",
                    ui_refresh_ms,
                    vec![c("operator console", ui_refresh_ms)],
                ),
            ],
        }
    }

    /// (field path, message) for every consumer that needs fresher data than planned.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.attributes.iter().enumerate() {
            if a.interval_ms == 0 {
                out.push((
                    format!("attributes[{i}].interval_ms"),
                    "must be positive".into(),
                ));
            }
            for (j, c) in a.consumers.iter().enumerate() {
                if c.required_ms < a.interval_ms {
                    out.push((
                        format!("attributes[{i}].consumers[{j}]"),
                        format!(
                            "{} needs {} every {} ms but {} refreshes it every {} ms",
                            c.model, a.attribute, c.required_ms, a.probe, a.interval_ms
                        ),
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_complete() {
        assert!(traceability_complete());
        assert_eq!(traceability_markdown().lines().count(), 2 + 8);
    }

    #[test]
    fn standard_plan_is_consistent() {
        assert!(RefreshPlan::standard(10, 200, 200).violations().is_empty());
        let mut p = RefreshPlan::standard(10, 200, 200);
        p.attributes[0].consumers[0].required_ms = 5;
        assert_eq!(p.violations()[0].0, "attributes[0].consumers[0]");
    }
}
