use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Action, Entrance, Plan, Scenario, TaskGraph};
use crate::num::Scalar;
use crate::objectives::{evaluate_unchecked, ChannelScales, FuelConvention};

/// Random arrangement: random line order, random entrances, random
/// separator positions. Pinned lines are then moved to the front of their
/// vehicle's route.
pub fn solve_random<T: Scalar>(graph: &TaskGraph<T>, seed: u64) -> Plan {
    random_plan(graph, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_plan<T: Scalar, R: Rng + ?Sized>(graph: &TaskGraph<T>, rng: &mut R) -> Plan {
    let mut actions: Vec<Action> = (0..graph.num_lines())
        .map(|i| Action::visit(i, if rng.gen::<bool>() { Entrance::One } else { Entrance::Zero }))
        .collect();
    actions.extend(std::iter::repeat_n(Action::Separator, graph.num_vehicles() - 1));
    actions.shuffle(rng);
    repair_pins(graph, &mut actions);
    Plan::new(actions)
}

/// Moves every pinned visit to the head of its vehicle's route with the
/// pinned entrance.
pub(crate) fn repair_pins<T: Scalar>(graph: &TaskGraph<T>, actions: &mut Vec<Action>) {
    if graph.pins().iter().all(Option::is_none) {
        return;
    }
    for (k, pin) in graph.pins().iter().enumerate() {
        let Some(pin) = *pin else { continue };
        if let Some(pos) = actions.iter().position(|a| matches!(a, Action::Visit(v) if v.line == pin.line)) {
            actions.remove(pos);
        }
        let head = if k == 0 {
            0
        } else {
            actions
                .iter()
                .enumerate()
                .filter(|(_, a)| **a == Action::Separator)
                .nth(k - 1)
                .map_or(actions.len(), |(i, _)| i + 1)
        };
        actions.insert(head, Action::Visit(pin));
    }
}

/// Mean objectives of `samples` random plans, for reward normalisation.
pub fn random_channel_scales<T: Scalar>(scenario: &Scenario<T>, samples: usize, seed: u64, convention: FuelConvention) -> ChannelScales {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.max(1);
    let mut sums = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let plan = random_plan(&scenario.graph, &mut rng);
        let o = evaluate_unchecked(&scenario.graph, &scenario.vehicles, &plan.actions, convention);
        sums.0 += o.total_transfer_distance.as_f64();
        sums.1 += o.makespan.as_f64();
        sums.2 += o.total_fuel.as_f64();
    }
    let nz = |x: f64| if x > 0.0 { x } else { 1.0 };
    ChannelScales {
        distance: nz(sums.0 / n as f64),
        time: nz(sums.1 / n as f64),
        fuel: nz(sums.2 / n as f64),
    }
}
