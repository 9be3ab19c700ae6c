//! Template-based explanations of adaptation events.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{AdaptationEvent, Initiator, Trigger};
use crate::bus::Millis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("adaptation event lacks the `{0}` snippet")]
    MissingSnippet(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    IdColor,
    Event,
    Action,
    DesiredChanges,
    Rationale,
    Cause,
}

impl Slot {
    pub fn marker(self) -> &'static str {
        match self {
            Slot::IdColor => "{id/color}",
            Slot::Event => "{Event}",
            Slot::Action => "{Action}",
            Slot::DesiredChanges => "{Desired Changes}",
            Slot::Rationale => "{Rationale}",
            Slot::Cause => "{cause}",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Slot::IdColor => "id/color",
            Slot::Event => "Event",
            Slot::Action => "Action",
            Slot::DesiredChanges => "Desired Changes",
            Slot::Rationale => "Rationale",
            Slot::Cause => "cause",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExplanationTemplate {
    pub trigger: Trigger,
    pub initiator: Initiator,
    pub pattern: &'static str,
    pub slots: &'static [Slot],
}

const EXT_M: ExplanationTemplate = ExplanationTemplate {
    trigger: Trigger::External,
    initiator: Initiator::Machine,
    pattern: "UAV-{id/color} identified {Event} in the environment. Therefore, adapting {Action} to {Rationale}",
    slots: &[Slot::IdColor, Slot::Event, Slot::Action, Slot::Rationale],
};

const EXT_H: ExplanationTemplate = ExplanationTemplate {
    trigger: Trigger::External,
    initiator: Initiator::Human,
    pattern: "UAV-{id/color} identified {Event} in the environment. Therefore, need {Desired Changes} to {Rationale}",
    slots: &[Slot::IdColor, Slot::Event, Slot::DesiredChanges, Slot::Rationale],
};

const INT_M: ExplanationTemplate = ExplanationTemplate {
    trigger: Trigger::Internal,
    initiator: Initiator::Machine,
    pattern: "UAV-{id/color} observed {Event}. Therefore, {Action} to {Rationale}",
    slots: &[Slot::IdColor, Slot::Event, Slot::Action, Slot::Rationale],
};

const INT_H: ExplanationTemplate = ExplanationTemplate {
    trigger: Trigger::Internal,
    initiator: Initiator::Human,
    pattern: "UAV-{id/color} observed {Event} due to {cause}. Therefore, need {Desired Changes} to {Rationale}",
    slots: &[Slot::IdColor, Slot::Event, Slot::Cause, Slot::DesiredChanges, Slot::Rationale],
};

pub const TEMPLATES: [ExplanationTemplate; 4] = [EXT_M, EXT_H, INT_M, INT_H];

pub fn select_template(e: &AdaptationEvent) -> ExplanationTemplate {
    match (e.trigger, e.initiator) {
        (Trigger::External, Initiator::Machine) => EXT_M,
        (Trigger::External, Initiator::Human) => EXT_H,
        (Trigger::Internal, Initiator::Machine) => INT_M,
        (Trigger::Internal, Initiator::Human) => INT_H,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub text: String,
    pub source: AdaptationEvent,
    pub rendered_at: Millis,
    /// Set for events whose template asks the human for a change.
    pub human_directed: bool,
}

fn fill(e: &AdaptationEvent, slot: Slot) -> Result<String, RenderError> {
    let missing = || RenderError::MissingSnippet(slot.name());
    Ok(match slot {
        Slot::IdColor => e.uav.display_color(),
        Slot::Event => e.event_snippet.clone(),
        Slot::Action => e.action_snippet.clone().ok_or_else(missing)?,
        Slot::DesiredChanges => e.desired_changes_snippet.clone().ok_or_else(missing)?,
        Slot::Rationale => e.rationale_snippet.clone(),
        Slot::Cause => e.cause_snippet.clone().ok_or_else(missing)?,
    })
}

/// Fills each slot of the matching template with its snippet verbatim.
pub fn render(e: &AdaptationEvent, at: Millis) -> Result<Explanation, RenderError> {
    let t = select_template(e);
    let mut text = String::with_capacity(t.pattern.len() + 64);
    let mut rest = t.pattern;
    // Walk the pattern once so snippet text is never re-scanned for markers.
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let close = open
            + rest[open..]
                .find('}')
                .expect("template markers are balanced");
        let marker = &rest[open..=close];
        let slot = *t
            .slots
            .iter()
            .find(|s| s.marker() == marker)
            .expect("template slot is declared");
        text.push_str(&fill(e, slot)?);
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    Ok(Explanation {
        text,
        source: e.clone(),
        rendered_at: at,
        human_directed: e.initiator == Initiator::Human,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedFilter {
    pub from: Option<Millis>,
    pub to: Option<Millis>,
    pub uav: Option<String>,
}

/// Append-only explanation log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationLog {
    entries: Vec<Explanation>,
}

impl ExplanationLog {
    pub fn push(&mut self, e: Explanation) {
        self.entries.push(e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self, n: usize) -> &[Explanation] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }

    /// Matching explanations ordered by render time (stable for ties).
    pub fn feed(&self, filter: &FeedFilter) -> Vec<Explanation> {
        let mut out: Vec<Explanation> = self
            .entries
            .iter()
            .filter(|e| filter.from.is_none_or(|f| e.rendered_at >= f))
            .filter(|e| filter.to.is_none_or(|t| e.rendered_at <= t))
            .filter(|e| filter.uav.as_ref().is_none_or(|u| &e.source.uav.name == u))
            .cloned()
            .collect();
        out.sort_by_key(|e| e.rendered_at);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::UavId;

    #[test]
    fn four_distinct_templates() {
        let patterns: std::collections::BTreeSet<_> = TEMPLATES.iter().map(|t| t.pattern).collect();
        assert_eq!(patterns.len(), 4);
        for t in TEMPLATES {
            for s in t.slots {
                assert!(t.pattern.contains(s.marker()));
            }
        }
    }

    #[test]
    fn int_h_mentions_cause() {
        let e = AdaptationEvent::internal_human(&UavId::new("b", "blue"), "e", "c", "d", "r", 0);
        assert!(select_template(&e)
            .pattern
            .contains("observed {Event} due to {cause}"));
    }

    #[test]
    fn missing_cause_is_named() {
        let mut e =
            AdaptationEvent::internal_human(&UavId::new("b", "blue"), "e", "c", "d", "r", 0);
        e.cause_snippet = None;
        assert_eq!(render(&e, 0), Err(RenderError::MissingSnippet("cause")));
    }

    #[test]
    fn braces_in_snippets_survive() {
        let e = AdaptationEvent::external_machine(
            &UavId::new("r", "red"),
            "{Event}",
            "{Action}",
            "x",
            3,
        );
        let x = render(&e, 3).unwrap();
        assert_eq!(
            x.text,
            "UAV-Red identified {Event} in the environment. Therefore, adapting {Action} to x"
        );
    }

    #[test]
    fn empty_feed() {
        assert!(ExplanationLog::default()
            .feed(&FeedFilter::default())
            .is_empty());
    }
}
