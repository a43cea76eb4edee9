#![allow(dead_code)]

use std::sync::Arc;

use edvrp::model::{Action, Entrance, LineVisit, Plan, Scenario, TaskGraph, TaskGraphParts, TerminalMode, VehicleParams, WorkingLineNode};
use edvrp::objectives::{vehicle_duration, FuelConvention, ObjectiveVector, VehicleTotals};
use edvrp::scenario::{generate_scenario, Instance, ScenarioSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random task graph with unquantized distances, so summation order shows
/// up in the low bits. Vehicle `pin_vehicle` (if any) is pinned to a line.
pub fn random_scenario(seed: u64, l: usize, m: usize, mode: TerminalMode, pinned: bool) -> Arc<Scenario<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = if mode == TerminalMode::SingleDepot { 1 } else { m };
    let mut line_distances = vec![[0.0; 4]; l * l];
    for i in 0..l {
        for j in (i + 1)..l {
            let d: [f64; 4] = std::array::from_fn(|_| rng.gen_range(1.0..300.0));
            line_distances[i * l + j] = d;
            line_distances[j * l + i] = [d[0], d[2], d[1], d[3]];
        }
    }
    let mut pins = vec![None; m];
    if pinned && l > 0 {
        let k = rng.gen_range(0..m);
        let e = Entrance::from_index(rng.gen_range(0..2)).unwrap();
        pins[k] = Some(LineVisit::new(rng.gen_range(0..l), e));
    }
    let graph = TaskGraph::from_parts(TaskGraphParts {
        mode,
        num_vehicles: m,
        lines: (0..l).map(|_| WorkingLineNode::line(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(20.0..200.0))).collect(),
        line_distances,
        start_distances: (0..slots * l).map(|_| [rng.gen_range(1.0..400.0), rng.gen_range(1.0..400.0)]).collect(),
        end_distances: (0..slots * l).map(|_| [rng.gen_range(1.0..400.0), rng.gen_range(1.0..400.0)]).collect(),
        direct_return: (0..m)
            .map(|_| if mode == TerminalMode::SingleDepot { 0.0 } else { rng.gen_range(0.0..100.0) })
            .collect(),
        pins,
        line_plots: None,
    })
    .unwrap();
    let vehicles = (0..m)
        .map(|_| {
            let vw = rng.gen_range(1.0..3.3);
            let vf = rng.gen_range(f64::max(vw, 2.0)..6.94);
            let cf = rng.gen_range(0.005..0.008);
            let cw = rng.gen_range(f64::max(cf, 0.007)..0.01);
            VehicleParams::new(vw, vf, cw, cf)
        })
        .collect();
    Arc::new(Scenario::new(graph, vehicles).unwrap())
}

/// Small geometric scenario: one or two plots with `l` lines in total.
pub fn small_field(seed: u64, l: usize, m: usize) -> Arc<Scenario<f64>> {
    let mut spec = ScenarioSpec::new(1, m, seed);
    spec.lines_per_plot = (l, l);
    Arc::new(generate_scenario(&spec).unwrap().instance::<f64>().unwrap().scenario)
}

pub fn sampled_instance(seed: u64) -> Instance<f64> {
    generate_scenario(&ScenarioSpec::sampled(seed)).unwrap().instance::<f64>().unwrap()
}

pub fn random_actions(rng: &mut ChaCha8Rng, l: usize, m: usize) -> Vec<Action> {
    let mut actions: Vec<Action> = (0..l)
        .map(|i| Action::visit(i, Entrance::from_index(rng.gen_range(0..2)).unwrap()))
        .collect();
    actions.extend(std::iter::repeat_n(Action::Separator, m - 1));
    actions.shuffle(rng);
    actions
}

/// Route-level reference evaluator.
///
/// Each vehicle's transfer distance is its legs in order followed by the
/// closing leg. The fleet distance adds one amount per action in plan
/// order; the final action also carries whatever closing legs remain.
pub fn reference_objectives(s: &Scenario<f64>, plan: &Plan, conv: FuelConvention) -> ObjectiveVector<f64> {
    let g = &s.graph;
    let m = g.num_vehicles();
    let mut routes: Vec<Vec<LineVisit>> = vec![Vec::new()];
    for a in &plan.actions {
        match a {
            Action::Separator => routes.push(Vec::new()),
            Action::Visit(v) => routes.last_mut().unwrap().push(*v),
        }
    }
    assert!(routes.len() <= m);
    routes.resize(m, Vec::new());

    let legs: Vec<Vec<f64>> = routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.iter()
                .enumerate()
                .map(|(i, v)| {
                    if i == 0 {
                        g.start_to_line(k, v.line, v.entrance)
                    } else {
                        g.line_to_line(r[i - 1].line, r[i - 1].entrance.opposite(), v.line, v.entrance)
                    }
                })
                .collect()
        })
        .collect();
    let close: Vec<f64> = routes
        .iter()
        .enumerate()
        .map(|(k, r)| match r.last() {
            Some(v) => g.line_to_end(v.line, v.entrance.opposite(), k),
            None => g.direct_return(k),
        })
        .collect();

    // per-action amounts
    let n = plan.actions.len();
    let mut fleet = 0.0;
    let mut k = 0;
    let mut i = 0;
    for (step, a) in plan.actions.iter().enumerate() {
        let amount = match a {
            Action::Visit(_) => {
                let leg = legs[k][i];
                i += 1;
                if step + 1 == n {
                    leg + close[k]
                } else {
                    leg
                }
            }
            Action::Separator => {
                let c = close[k];
                k += 1;
                i = 0;
                if step + 1 == n {
                    c + close[k]
                } else {
                    c
                }
            }
        };
        fleet += amount;
    }
    if n == 0 {
        fleet = close[0];
    }

    let mut per_vehicle = Vec::with_capacity(m);
    let (mut makespan, mut fuel, mut work_total) = (0.0f64, 0.0, 0.0);
    for k in 0..m {
        let v = &s.vehicles[k];
        let distance = if routes[k].is_empty() {
            0.0 + close[k]
        } else {
            legs[k].iter().fold(0.0, |a, b| a + b) + close[k]
        };
        let work = routes[k].iter().fold(0.0, |a, r| a + g.line_length(r.line));
        let time = vehicle_duration(v, distance, work);
        let f = conv.fuel(v, distance, work);
        makespan = makespan.max(time);
        fuel += f;
        work_total += work;
        per_vehicle.push(VehicleTotals { distance, work, time, fuel: f });
    }
    ObjectiveVector {
        total_transfer_distance: fleet,
        makespan,
        total_fuel: fuel,
        total_work: work_total,
        per_vehicle,
    }
}

/// Every valid plan: all orderings, entrances and separator positions,
/// honouring pins.
pub fn all_plans(s: &Scenario<f64>) -> Vec<Plan> {
    let g = &s.graph;
    let (l, m) = (g.num_lines(), g.num_vehicles());
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; l];
    #[allow(clippy::too_many_arguments)]
    fn rec(g: &TaskGraph<f64>, l: usize, m: usize, used: &mut [bool], current: &mut Vec<Action>, vehicle: usize, route_len: usize, out: &mut Vec<Plan>) {
        let placed = used.iter().filter(|u| **u).count();
        let pin = g.pin(vehicle);
        let pin_pending = pin.is_some() && route_len == 0;
        if placed == l && vehicle + 1 == m && !pin_pending {
            out.push(Plan::new(current.clone()));
            return;
        }
        if !pin_pending && vehicle + 1 < m {
            current.push(Action::Separator);
            rec(g, l, m, used, current, vehicle + 1, 0, out);
            current.pop();
        }
        for line in 0..l {
            if used[line] {
                continue;
            }
            if let Some(owner) = g.pinned_vehicle(line) {
                if owner != vehicle {
                    continue;
                }
            }
            for e in Entrance::BOTH {
                let visit = LineVisit::new(line, e);
                if pin_pending && pin != Some(visit) {
                    continue;
                }
                used[line] = true;
                current.push(Action::Visit(visit));
                rec(g, l, m, used, current, vehicle, route_len + 1, out);
                current.pop();
                used[line] = false;
            }
        }
    }
    rec(g, l, m, &mut used, &mut current, 0, 0, &mut out);
    out
}
