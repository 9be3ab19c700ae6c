//! Detection gating: confidence and reliability thresholds plus calibrated trust.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::perception::DetectionEvent;

pub const DEFAULT_CONFIDENCE_ACT: f64 = 0.8;
pub const DEFAULT_RELIABILITY_ACT: f64 = 0.8;
pub const DEFAULT_TRUST_FLOOR: f64 = 0.5;
pub const DEFAULT_TRUST_ALPHA: f64 = 0.2;
pub const DEFAULT_INITIAL_TRUST: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("{name} = {value} must lie strictly inside (0, 1)")]
    OutOfRange { name: &'static str, value: f64 },
}

fn open_unit(name: &'static str, value: f64) -> Result<(), PolicyError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(PolicyError::OutOfRange { name, value })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionDecision {
    ActAutonomously,
    ContinueSearch,
    RequestHelp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Confirmed,
    Refuted,
}

/// Thresholds as configured in a mission fragment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub confidence_act: f64,
    pub reliability_act: f64,
    pub trust_floor: f64,
    pub trust_alpha: f64,
    pub initial_trust: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            confidence_act: DEFAULT_CONFIDENCE_ACT,
            reliability_act: DEFAULT_RELIABILITY_ACT,
            trust_floor: DEFAULT_TRUST_FLOOR,
            trust_alpha: DEFAULT_TRUST_ALPHA,
            initial_trust: DEFAULT_INITIAL_TRUST,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), PolicyError> {
        open_unit("confidence_act", self.confidence_act)?;
        open_unit("reliability_act", self.reliability_act)?;
        open_unit("trust_floor", self.trust_floor)?;
        open_unit("trust_alpha", self.trust_alpha)?;
        if !(0.0..=1.0).contains(&self.initial_trust) {
            return Err(PolicyError::OutOfRange {
                name: "initial_trust",
                value: self.initial_trust,
            });
        }
        Ok(())
    }
}

/// Running trust in one capability, updated from human agreement.
///
/// The score is an exponential moving average over the full outcome history:
/// `s ← (1 − α)·s + α·[confirmed]`, starting from `initial`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedTrust {
    pub capability: String,
    initial: f64,
    alpha: f64,
    score: f64,
    history: Vec<Outcome>,
}

impl CalibratedTrust {
    pub fn new(capability: impl Into<String>, initial: f64, alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&initial) && alpha > 0.0 && alpha <= 1.0);
        CalibratedTrust {
            capability: capability.into(),
            initial,
            alpha,
            score: initial,
            history: Vec::new(),
        }
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn history(&self) -> &[Outcome] {
        &self.history
    }

    pub fn update(&mut self, outcome: Outcome) -> f64 {
        let x = if outcome == Outcome::Confirmed {
            1.0
        } else {
            0.0
        };
        self.score = (1.0 - self.alpha) * self.score + self.alpha * x;
        self.history.push(outcome);
        self.score
    }

    /// Recomputes the score from `initial` and the history alone.
    pub fn replayed_score(&self) -> f64 {
        let mut t = CalibratedTrust::new(self.capability.clone(), self.initial, self.alpha);
        for &o in &self.history {
            t.update(o);
        }
        t.score
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub confidence_act: f64,
    pub reliability_act: f64,
    pub trust_floor: f64,
    pub trust: CalibratedTrust,
}

impl ThresholdPolicy {
    pub fn new(t: &Thresholds, capability: &str) -> Result<Self, PolicyError> {
        t.validate()?;
        Ok(ThresholdPolicy {
            confidence_act: t.confidence_act,
            reliability_act: t.reliability_act,
            trust_floor: t.trust_floor,
            trust: CalibratedTrust::new(capability, t.initial_trust, t.trust_alpha),
        })
    }

    pub fn decide(&self, d: &DetectionEvent) -> DetectionDecision {
        gate(
            d.confidence,
            d.reliability,
            self.confidence_act,
            self.reliability_act,
            self.trust.score(),
            self.trust_floor,
        )
    }

    /// Decision after responsibility has reverted to the UAV: the trust gate is waived.
    pub fn decide_without_trust(&self, d: &DetectionEvent) -> DetectionDecision {
        gate(
            d.confidence,
            d.reliability,
            self.confidence_act,
            self.reliability_act,
            1.0,
            0.0,
        )
    }
}

fn gate(
    confidence: f64,
    reliability: f64,
    c_act: f64,
    r_act: f64,
    trust: f64,
    floor: f64,
) -> DetectionDecision {
    if confidence < c_act {
        DetectionDecision::ContinueSearch
    } else if reliability >= r_act && trust >= floor {
        DetectionDecision::ActAutonomously
    } else {
        DetectionDecision::RequestHelp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;

    fn det(confidence: f64, reliability: f64) -> DetectionEvent {
        DetectionEvent {
            object_class: "person".into(),
            confidence,
            reliability,
            location: GeoPoint::new(0.0, 0.0),
            frame: 1,
            uav: "blue".into(),
        }
    }

    fn policy(trust: f64) -> ThresholdPolicy {
        let t = Thresholds {
            initial_trust: trust,
            ..Thresholds::default()
        };
        ThresholdPolicy::new(&t, "person-detection").unwrap()
    }

    #[test]
    fn decision_examples() {
        assert_eq!(
            policy(0.9).decide(&det(0.95, 0.9)),
            DetectionDecision::ActAutonomously
        );
        assert_eq!(
            policy(0.9).decide(&det(0.95, 0.4)),
            DetectionDecision::RequestHelp
        );
        assert_eq!(
            policy(0.9).decide(&det(0.3, 0.99)),
            DetectionDecision::ContinueSearch
        );
        assert_eq!(
            policy(0.3).decide(&det(0.95, 0.9)),
            DetectionDecision::RequestHelp
        );
        assert_eq!(
            policy(0.3).decide_without_trust(&det(0.95, 0.9)),
            DetectionDecision::ActAutonomously
        );
    }

    #[test]
    fn trust_update_arithmetic() {
        let mut t = CalibratedTrust::new("person-detection", 0.5, 0.2);
        assert!((t.update(Outcome::Confirmed) - 0.6).abs() < 1e-15);
        let mut t = CalibratedTrust::new("person-detection", 0.5, 0.2);
        assert!((t.update(Outcome::Refuted) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn alternating_outcomes_stay_in_band() {
        let mut t = CalibratedTrust::new("person-detection", 0.5, 0.2);
        for i in 0..100 {
            let s = t.update(if i % 2 == 0 {
                Outcome::Confirmed
            } else {
                Outcome::Refuted
            });
            assert!((0.4 - 1e-12..=0.6 + 1e-12).contains(&s), "step {i}: {s}");
        }
        assert_eq!(t.replayed_score(), t.score());
    }

    #[test]
    fn thresholds_must_be_open_unit() {
        let t = Thresholds {
            confidence_act: 1.0,
            ..Thresholds::default()
        };
        assert!(t.validate().is_err());
        let t = Thresholds {
            trust_floor: 0.0,
            ..Thresholds::default()
        };
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn decisions_partition_score_space(c in 0.0f64..=1.0, r in 0.0f64..=1.0, trust in 0.0f64..=1.0) {
            let p = policy(trust);
            let d = p.decide(&det(c, r));
            let act = c >= p.confidence_act && r >= p.reliability_act && trust >= p.trust_floor;
            let help = c >= p.confidence_act && (r < p.reliability_act || trust < p.trust_floor);
            let cont = c < p.confidence_act;
            prop_assert_eq!([act, help, cont].iter().filter(|&&b| b).count(), 1);
            prop_assert_eq!(d == DetectionDecision::ActAutonomously, act);
            prop_assert_eq!(d == DetectionDecision::RequestHelp, help);
            prop_assert_eq!(d == DetectionDecision::ContinueSearch, cont);
        }
    }
}
