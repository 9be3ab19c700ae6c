//! Runtime models for human-multi-UAV teaming: a message bus, onboard
//! agents, a ground-control service and a deterministic mission harness.

pub mod adaptation;
pub mod agent;
pub mod bus;
pub mod coord;
pub mod explain;
pub mod fleet;
pub mod gcs;
pub mod geo;
pub mod harness;
pub mod message;
pub mod triage;
