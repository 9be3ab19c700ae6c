//! The task-centric fleet model: every active UAV's state machine merged into
//! one graph, with one colored token per UAV on its current state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::UavId;
use crate::agent::TaskStateMachine;
use crate::bus::Millis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FleetError {
    #[error("no machines to merge")]
    Empty,
    #[error("UAV `{0}` appears more than once")]
    DuplicateUav(String),
    #[error("UAV `{0}` is not registered")]
    UnknownUav(String),
    #[error("state `{state}` reported by `{uav}` is not in the fleet graph")]
    UnknownState { uav: String, state: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub event: String,
    pub to: String,
    /// UAVs whose machine has this transition.
    pub uavs: BTreeSet<String>,
    /// UAVs that had it before a reconfiguration and no longer can take it.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub inactive: BTreeSet<String>,
}

/// Union of member machines. Nodes and edges are kept in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalStateGraph {
    pub nodes: BTreeSet<String>,
    pub edges: Vec<GraphEdge>,
}

impl GlobalStateGraph {
    pub fn merge<'a>(
        machines: impl IntoIterator<Item = (&'a UavId, &'a TaskStateMachine)>,
    ) -> Result<Self, FleetError> {
        let mut g = GlobalStateGraph::default();
        let mut seen = BTreeSet::new();
        for (id, m) in machines {
            if !seen.insert(id.name.clone()) {
                return Err(FleetError::DuplicateUav(id.name.clone()));
            }
            g.add(&id.name, m);
        }
        if seen.is_empty() {
            return Err(FleetError::Empty);
        }
        Ok(g)
    }

    fn edge_mut(&mut self, from: &str, event: &str, to: &str) -> &mut GraphEdge {
        let key = (from, event, to);
        match self
            .edges
            .binary_search_by(|e| (e.from.as_str(), e.event.as_str(), e.to.as_str()).cmp(&key))
        {
            Ok(i) => &mut self.edges[i],
            Err(i) => {
                self.edges.insert(
                    i,
                    GraphEdge {
                        from: from.into(),
                        event: event.into(),
                        to: to.into(),
                        uavs: BTreeSet::new(),
                        inactive: BTreeSet::new(),
                    },
                );
                &mut self.edges[i]
            }
        }
    }

    /// Adds one machine's states and transitions; never removes anything.
    pub fn add(&mut self, uav: &str, m: &TaskStateMachine) {
        self.nodes.extend(m.states().iter().cloned());
        for t in m.transitions() {
            let e = self.edge_mut(&t.from, &t.event, &t.to);
            e.uavs.insert(uav.to_string());
            e.inactive.remove(uav);
        }
    }

    /// Replaces a UAV's machine. Transitions it lost stay in the graph,
    /// tagged inactive for that UAV.
    pub fn reconfigure(&mut self, uav: &str, m: &TaskStateMachine) {
        let keep: BTreeSet<(&str, &str, &str)> = m
            .transitions()
            .iter()
            .map(|t| (t.from.as_str(), t.event.as_str(), t.to.as_str()))
            .collect();
        for e in &mut self.edges {
            if e.uavs.contains(uav)
                && !keep.contains(&(e.from.as_str(), e.event.as_str(), e.to.as_str()))
            {
                e.uavs.remove(uav);
                e.inactive.insert(uav.to_string());
            }
        }
        self.add(uav, m);
    }

    pub fn edge(&self, from: &str, event: &str, to: &str) -> Option<&GraphEdge> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.event == event && e.to == to)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub uav: String,
    pub color: String,
    pub node: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPlacement {
    pub tokens: BTreeMap<String, Token>,
    pub as_of: Millis,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub state: String,
    pub entered_at: Millis,
    /// `None` while the UAV is still in the state.
    pub exited_at: Option<Millis>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateHistory {
    pub visits: BTreeMap<String, Vec<Visit>>,
}

/// Immutable view handed to readers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetSnapshot {
    pub graph: GlobalStateGraph,
    pub placement: TokenPlacement,
    /// Node order for rendering.
    pub layout: Vec<String>,
    pub as_of: Millis,
}

/// Single-writer fleet model. Readers take snapshots.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetModel {
    graph: GlobalStateGraph,
    placement: TokenPlacement,
    history: StateHistory,
    members: BTreeMap<String, UavId>,
}

impl FleetModel {
    /// Builds the graph and puts every token on its machine's current state.
    pub fn new<'a>(
        machines: impl IntoIterator<Item = (&'a UavId, &'a TaskStateMachine)> + Clone,
        at: Millis,
    ) -> Result<Self, FleetError> {
        let graph = GlobalStateGraph::merge(machines.clone())?;
        let mut model = FleetModel {
            graph,
            ..FleetModel::default()
        };
        for (id, m) in machines {
            model.members.insert(id.name.clone(), id.clone());
            model.place(id, m.current(), at);
        }
        model.placement.as_of = at;
        Ok(model)
    }

    fn place(&mut self, id: &UavId, state: &str, at: Millis) {
        self.placement.tokens.insert(
            id.name.clone(),
            Token {
                uav: id.name.clone(),
                color: id.color.clone(),
                node: state.into(),
            },
        );
        self.history
            .visits
            .entry(id.name.clone())
            .or_default()
            .push(Visit {
                state: state.into(),
                entered_at: at,
                exited_at: None,
            });
    }

    pub fn graph(&self) -> &GlobalStateGraph {
        &self.graph
    }

    pub fn placement(&self) -> &TokenPlacement {
        &self.placement
    }

    pub fn members(&self) -> impl Iterator<Item = &UavId> {
        self.members.values()
    }

    pub fn state_of(&self, uav: &str) -> Option<&str> {
        self.placement.tokens.get(uav).map(|t| t.node.as_str())
    }

    /// Adds a UAV to a running fleet.
    pub fn register(
        &mut self,
        id: &UavId,
        m: &TaskStateMachine,
        at: Millis,
    ) -> Result<(), FleetError> {
        if self.members.contains_key(&id.name) {
            return Err(FleetError::DuplicateUav(id.name.clone()));
        }
        self.graph.add(&id.name, m);
        self.members.insert(id.name.clone(), id.clone());
        self.place(id, m.current(), at);
        self.placement.as_of = self.placement.as_of.max(at);
        Ok(())
    }

    /// Moves a token. Re-reporting the current node changes nothing.
    pub fn update_token(
        &mut self,
        uav: &str,
        state: &str,
        at: Millis,
    ) -> Result<&TokenPlacement, FleetError> {
        let id = self
            .members
            .get(uav)
            .cloned()
            .ok_or_else(|| FleetError::UnknownUav(uav.into()))?;
        if !self.graph.nodes.contains(state) {
            return Err(FleetError::UnknownState {
                uav: uav.into(),
                state: state.into(),
            });
        }
        if self.state_of(uav) == Some(state) {
            return Ok(&self.placement);
        }
        if let Some(last) = self.history.visits.get_mut(uav).and_then(|v| v.last_mut()) {
            last.exited_at = Some(at);
        }
        self.place(&id, state, at);
        self.placement.as_of = self.placement.as_of.max(at);
        Ok(&self.placement)
    }

    /// Removes a UAV's token and closes its last visit. Its edges stay.
    pub fn deregister(&mut self, uav: &str, at: Millis) -> Result<(), FleetError> {
        self.members
            .remove(uav)
            .ok_or_else(|| FleetError::UnknownUav(uav.into()))?;
        self.placement.tokens.remove(uav);
        if let Some(last) = self.history.visits.get_mut(uav).and_then(|v| v.last_mut()) {
            if last.exited_at.is_none() {
                last.exited_at = Some(at);
            }
        }
        self.placement.as_of = self.placement.as_of.max(at);
        Ok(())
    }

    pub fn snapshot(&self, now: Millis) -> FleetSnapshot {
        FleetSnapshot {
            graph: self.graph.clone(),
            placement: self.placement.clone(),
            layout: self.graph.nodes.iter().cloned().collect(),
            as_of: now,
        }
    }

    /// Visits overlapping `[from, to]`, clipped to it.
    pub fn history(&self, uav: &str, from: Millis, to: Millis) -> Result<Vec<Visit>, FleetError> {
        let visits = self
            .history
            .visits
            .get(uav)
            .ok_or_else(|| FleetError::UnknownUav(uav.into()))?;
        Ok(visits
            .iter()
            .filter(|v| v.entered_at <= to && v.exited_at.is_none_or(|e| e >= from))
            .map(|v| Visit {
                state: v.state.clone(),
                entered_at: v.entered_at.max(from),
                exited_at: Some(v.exited_at.map_or(to, |e| e.min(to))),
            })
            .collect())
    }

    pub fn full_history(&self) -> &StateHistory {
        &self.history
    }
}
