//! Random fleets of task machines.

use std::collections::{BTreeMap, BTreeSet};

use hmt_core::adaptation::UavId;
use hmt_core::agent::{MachineSpec, TaskStateMachine, Transition};
use hmt_core::fleet::{FleetError, FleetModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::union_oracle;

pub fn random_machine(rng: &mut ChaCha8Rng) -> MachineSpec {
    let pool: Vec<String> = (0..20).map(|i| format!("s{i}")).collect();
    let n = rng.gen_range(2..=20);
    let states: Vec<String> = pool.choose_multiple(rng, n).cloned().collect();
    let mut used = BTreeSet::new();
    let mut transitions = Vec::new();
    for _ in 0..rng.gen_range(1..=3 * n) {
        let from = states.choose(rng).unwrap().clone();
        let event = format!("e{}", rng.gen_range(0..8));
        if used.insert((from.clone(), event.clone())) {
            transitions.push(Transition::new(&from, &event, states.choose(rng).unwrap()));
        }
    }
    MachineSpec {
        initial: states[0].clone(),
        states,
        transitions,
    }
}

/// Builds a random fleet, compares it to the union oracle and moves tokens around.
pub fn check_fleet(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=10);
    let specs: Vec<(String, MachineSpec)> = (0..count)
        .map(|i| (format!("uav{i}"), random_machine(&mut rng)))
        .collect();
    let ids: Vec<UavId> = specs.iter().map(|(n, _)| UavId::new(n, n)).collect();
    let machines: Vec<TaskStateMachine> = specs
        .iter()
        .map(|(_, m)| TaskStateMachine::new(m).unwrap())
        .collect();
    let pairs: Vec<(&UavId, &TaskStateMachine)> = ids.iter().zip(&machines).collect();
    let mut fleet = FleetModel::new(pairs.iter().copied(), 0).unwrap();

    let (nodes, edges) = union_oracle(&specs);
    assert_eq!(fleet.graph().nodes, nodes);
    let got: BTreeMap<(String, String, String), BTreeSet<String>> = fleet
        .graph()
        .edges
        .iter()
        .map(|e| {
            (
                (e.from.clone(), e.event.clone(), e.to.clone()),
                e.uavs.clone(),
            )
        })
        .collect();
    assert_eq!(got, edges);
    assert_eq!(fleet.placement().tokens.len(), count);

    for step in 1..=50 {
        let i = rng.gen_range(0..count);
        let (name, spec) = &specs[i];
        if rng.gen_bool(0.1) {
            let err = fleet.update_token(name, "nowhere", step).unwrap_err();
            assert!(matches!(err, FleetError::UnknownState { .. }));
        } else {
            let state = spec.states.choose(&mut rng).unwrap();
            fleet.update_token(name, state, step).unwrap();
            assert_eq!(fleet.state_of(name), Some(state.as_str()));
        }
        assert_eq!(fleet.placement().tokens.len(), count);
    }
}
