use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bus::Millis;

pub const DEFAULT_LAG_MS: Millis = 5_000;
pub const DEFAULT_RECOVERY_MS: Millis = 2_000;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponsivenessConfig {
    pub lag_ms: Millis,
    pub recovery_ms: Millis,
    pub window: usize,
}

impl Default for ResponsivenessConfig {
    fn default() -> Self {
        ResponsivenessConfig {
            lag_ms: DEFAULT_LAG_MS,
            recovery_ms: DEFAULT_RECOVERY_MS,
            window: DEFAULT_WINDOW,
        }
    }
}

impl ResponsivenessConfig {
    pub fn is_valid(&self) -> bool {
        self.recovery_ms < self.lag_ms && self.window > 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSample {
    pub prompted_at: Millis,
    /// Latency of the answer; `None` for prompts that went unanswered.
    pub latency: Option<Millis>,
}

/// Rolling window over the most recent operator prompts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsivenessMetric {
    capacity: usize,
    samples: VecDeque<PromptSample>,
}

impl ResponsivenessMetric {
    pub fn new(capacity: usize) -> Self {
        ResponsivenessMetric {
            capacity: capacity.max(1),
            samples: VecDeque::new(),
        }
    }

    fn push(&mut self, s: PromptSample) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(s);
    }

    pub fn record_answered(&mut self, prompted_at: Millis, answered_at: Millis) {
        self.push(PromptSample {
            prompted_at,
            latency: Some(answered_at.saturating_sub(prompted_at)),
        });
    }

    pub fn record_unanswered(&mut self, prompted_at: Millis) {
        self.push(PromptSample {
            prompted_at,
            latency: None,
        });
    }

    pub fn samples(&self) -> impl Iterator<Item = &PromptSample> {
        self.samples.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean over answered prompts only.
    pub fn mean_response_ms(&self) -> Option<f64> {
        let answered: Vec<Millis> = self.samples.iter().filter_map(|s| s.latency).collect();
        if answered.is_empty() {
            None
        } else {
            Some(answered.iter().sum::<Millis>() as f64 / answered.len() as f64)
        }
    }

    pub fn availability(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let answered = self.samples.iter().filter(|s| s.latency.is_some()).count();
        Some(answered as f64 / self.samples.len() as f64)
    }
}
