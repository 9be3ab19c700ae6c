//! Tug-of-war detection over interleaved human and machine control actions.
//!
//! A tug-of-war on one control dimension is a chain of actions, taken in
//! order from the trailing window, where every consecutive pair switches actor
//! and pulls in the opposing direction. The detector reports a conflict when
//! the longest such chain has at least `k` alternations (chain length − 1).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::CoordError;
use crate::adaptation::{Direction, Initiator};
use crate::bus::Millis;

pub const DEFAULT_TUG_K: usize = 3;
pub const DEFAULT_TUG_WINDOW_MS: Millis = 30_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub actor: Initiator,
    pub uav: String,
    pub dimension: String,
    pub direction: Direction,
    pub at: Millis,
    #[serde(default)]
    pub failsafe: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub uav: String,
    pub dimension: String,
    pub alternations: usize,
    pub at: Millis,
}

fn other(actor: Initiator) -> Initiator {
    match actor {
        Initiator::Human => Initiator::Machine,
        Initiator::Machine => Initiator::Human,
    }
}

fn opposite(d: &Direction) -> Direction {
    match d {
        Direction::Increase => Direction::Decrease,
        Direction::Decrease => Direction::Increase,
        Direction::Set(v) => Direction::Unset(v.clone()),
        Direction::Unset(v) => Direction::Set(v.clone()),
    }
}

/// Alternations in the longest actor-switching, direction-opposing chain.
/// Linear: each entry extends the best chain ending in its unique complement.
pub fn longest_alternation<'a>(entries: impl IntoIterator<Item = &'a ActionLogEntry>) -> usize {
    let mut best: HashMap<(Initiator, Direction), usize> = HashMap::new();
    let mut longest = 0;
    for e in entries {
        let prev = best
            .get(&(other(e.actor), opposite(&e.direction)))
            .copied()
            .unwrap_or(0);
        let len = prev + 1;
        let slot = best.entry((e.actor, e.direction.clone())).or_insert(0);
        *slot = (*slot).max(len);
        longest = longest.max(len);
    }
    longest.saturating_sub(1)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionLog {
    by_uav: BTreeMap<String, Vec<ActionLogEntry>>,
    /// Per (uav, dimension): index of the first entry that still counts.
    epochs: BTreeMap<String, BTreeMap<String, usize>>,
}

impl ActionLog {
    pub fn record(&mut self, e: ActionLogEntry) -> Result<(), CoordError> {
        let entries = self.by_uav.entry(e.uav.clone()).or_default();
        if let Some(last) = entries.last() {
            if e.at < last.at {
                return Err(CoordError::OutOfOrderAction {
                    uav: e.uav,
                    at: e.at,
                    last: last.at,
                });
            }
        }
        entries.push(e);
        Ok(())
    }

    pub fn entries(&self, uav: &str) -> &[ActionLogEntry] {
        self.by_uav.get(uav).map_or(&[], Vec::as_slice)
    }

    /// Forget everything recorded so far on `dimension` (after a cycle was broken or autonomy restored).
    pub fn reset_epoch(&mut self, uav: &str, dimension: &str) {
        let len = self.entries(uav).len();
        self.epochs
            .entry(uav.into())
            .or_default()
            .insert(dimension.into(), len);
    }

    fn epoch(&self, uav: &str, dimension: &str) -> usize {
        self.epochs
            .get(uav)
            .and_then(|m| m.get(dimension))
            .copied()
            .unwrap_or(0)
    }

    /// Entries on `dimension` inside `[now − window, now]` and after the epoch.
    pub fn window<'a>(
        &'a self,
        uav: &str,
        dimension: &'a str,
        now: Millis,
        window: Millis,
    ) -> impl Iterator<Item = &'a ActionLogEntry> + 'a {
        let start = now.saturating_sub(window);
        let epoch = self.epoch(uav, dimension);
        self.entries(uav)
            .iter()
            .enumerate()
            .filter(move |(i, e)| {
                *i >= epoch && e.dimension == dimension && e.at >= start && e.at <= now
            })
            .map(|(_, e)| e)
    }

    pub fn detect_tug_of_war(
        &self,
        uav: &str,
        now: Millis,
        window: Millis,
        k: usize,
    ) -> Option<Conflict> {
        let dims: BTreeSet<&str> = self
            .entries(uav)
            .iter()
            .map(|e| e.dimension.as_str())
            .collect();
        dims.into_iter().find_map(|dim| {
            let alternations = longest_alternation(self.window(uav, dim, now, window));
            (alternations >= k).then(|| Conflict {
                uav: uav.into(),
                dimension: dim.into(),
                alternations,
                at: now,
            })
        })
    }
}
