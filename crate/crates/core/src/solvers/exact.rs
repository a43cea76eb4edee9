use crate::error::{Error, Result};
use crate::model::{Action, Entrance, LineVisit, Plan, Scenario, TaskGraph, VehicleParams};
use crate::num::Scalar;
use crate::objectives::{closing_leg, evaluate_plan, finish, vehicle_duration, Cursor, FuelConvention, Objective, ObjectiveVector, VehicleTotals};

pub const EXACT_MAX_LINES: usize = 8;
pub const EXACT_MAX_VEHICLES: usize = 2;

fn guard<T: Scalar>(graph: &TaskGraph<T>) -> Result<()> {
    if graph.num_lines() > EXACT_MAX_LINES || graph.num_vehicles() > EXACT_MAX_VEHICLES {
        return Err(Error::TooLarge {
            lines: graph.num_lines(),
            vehicles: graph.num_vehicles(),
            max_lines: EXACT_MAX_LINES,
            max_vehicles: EXACT_MAX_VEHICLES,
        });
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Node<T> {
    distance: [T; 2],
    work: [T; 2],
    fleet: T,
    vehicle: usize,
    cursor: Cursor,
    used: u32,
    separators: usize,
}

/// Depth-first walk over every valid plan, in lexicographic order of
/// actions (separator first, then lines by index and entrance).
///
/// Arithmetic follows plan evaluation step for step, so leaf totals are
/// bit-identical to evaluating the plan.
struct Walk<'a, T, F> {
    graph: &'a TaskGraph<T>,
    l: usize,
    m: usize,
    path: Vec<Action>,
    visit: F,
}

impl<T: Scalar, F: FnMut(&[Action], &Node<T>) -> bool> Walk<'_, T, F> {
    fn run(&mut self, node: Node<T>) {
        let done_lines = node.used.count_ones() as usize == self.l;
        if done_lines && node.separators + 1 == self.m {
            (self.visit)(&self.path, &node);
            return;
        }
        // the callback can prune by returning false
        if !self.path.is_empty() && !(self.visit)(&self.path, &node) {
            return;
        }
        let g = self.graph;
        let k = node.vehicle;
        let pending = match node.cursor {
            Cursor::Start(k) => g.pin(k),
            Cursor::After(_) => None,
        };
        if node.separators + 1 < self.m && pending.is_none() {
            let close = closing_leg(g, node.cursor, k);
            let mut next = node;
            next.distance[k] = next.distance[k] + close;
            next.vehicle = k + 1;
            next.cursor = Cursor::Start(k + 1);
            next.separators += 1;
            let amount = if done_lines && next.separators + 1 == self.m {
                let direct = g.direct_return(k + 1);
                next.distance[k + 1] = next.distance[k + 1] + direct;
                close + direct
            } else {
                close
            };
            next.fleet = next.fleet + amount;
            self.path.push(Action::Separator);
            self.run(next);
            self.path.pop();
        }
        for line in 0..self.l {
            if node.used & (1 << line) != 0 {
                continue;
            }
            for e in Entrance::BOTH {
                let visit = LineVisit::new(line, e);
                match pending {
                    Some(p) if p != visit => continue,
                    None if g.pinned_vehicle(line).is_some() => continue,
                    _ => {}
                }
                let leg = match node.cursor {
                    Cursor::Start(k) => g.start_to_line(k, line, e),
                    Cursor::After(p) => g.line_to_line(p.line, p.exit(), line, e),
                };
                let mut next = node;
                next.distance[k] = next.distance[k] + leg;
                next.work[k] = next.work[k] + g.line_length(line);
                next.cursor = Cursor::After(visit);
                next.used |= 1 << line;
                let last = next.used.count_ones() as usize == self.l && node.separators + 1 == self.m;
                let amount = if last {
                    let close = closing_leg(g, next.cursor, k);
                    next.distance[k] = next.distance[k] + close;
                    leg + close
                } else {
                    leg
                };
                next.fleet = next.fleet + amount;
                self.path.push(Action::Visit(visit));
                self.run(next);
                self.path.pop();
            }
        }
    }
}

fn start<T: Scalar>(graph: &TaskGraph<T>) -> Node<T> {
    let mut node = Node {
        distance: [T::zero(); 2],
        work: [T::zero(); 2],
        fleet: T::zero(),
        vehicle: 0,
        cursor: Cursor::Start(0),
        used: 0,
        separators: 0,
    };
    if graph.num_lines() == 0 && graph.num_vehicles() == 1 {
        node.distance[0] = graph.direct_return(0);
        node.fleet = node.distance[0];
    }
    node
}

fn totals<T: Scalar>(node: &Node<T>, m: usize) -> Vec<VehicleTotals<T>> {
    (0..m)
        .map(|k| VehicleTotals {
            distance: node.distance[k],
            work: node.work[k],
            ..Default::default()
        })
        .collect()
}

/// Calls `f` with every valid plan and its objective vector; returns the
/// number of plans.
pub fn enumerate_plans<T: Scalar>(
    graph: &TaskGraph<T>,
    vehicles: &[VehicleParams<T>],
    convention: FuelConvention,
    mut f: impl FnMut(&[Action], &ObjectiveVector<T>),
) -> Result<u64> {
    guard(graph)?;
    let m = graph.num_vehicles();
    let l = graph.num_lines();
    let mut count = 0u64;
    let mut walk = Walk {
        graph,
        l,
        m,
        path: Vec::with_capacity(l + m),
        visit: |path: &[Action], node: &Node<T>| {
            if path.len() == l + m - 1 {
                count += 1;
                f(path, &finish(totals(node, m), node.fleet, vehicles, convention));
            }
            true
        },
    };
    walk.run(start(graph));
    Ok(count)
}

/// Objective value of a partial or complete node. Partial values never
/// exceed the value of any completion.
fn value<T: Scalar>(node: &Node<T>, vehicles: &[VehicleParams<T>], objective: Objective, convention: FuelConvention) -> T {
    match objective {
        Objective::Distance => node.fleet,
        Objective::Time => vehicles
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, v)| acc.max(vehicle_duration(v, node.distance[k], node.work[k]))),
        Objective::Fuel => vehicles
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, v)| acc + convention.fuel(v, node.distance[k], node.work[k])),
    }
}

/// Global optimum by exhaustive search with bound pruning. Among equal
/// optima the lexicographically smallest plan wins.
pub fn solve_exact<T: Scalar>(
    scenario: &Scenario<T>,
    objective: Objective,
    convention: FuelConvention,
) -> Result<(Plan, ObjectiveVector<T>)> {
    let graph = &scenario.graph;
    let vehicles = &scenario.vehicles;
    guard(graph)?;
    let m = graph.num_vehicles();
    let l = graph.num_lines();
    let mut best: Option<(T, Vec<Action>)> = None;
    let mut walk = Walk {
        graph,
        l,
        m,
        path: Vec::with_capacity(l + m),
        visit: |path: &[Action], node: &Node<T>| {
            let v = value(node, vehicles, objective, convention);
            if path.len() == l + m - 1 {
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, path.to_vec()));
                }
                true
            } else {
                best.as_ref().is_none_or(|(b, _)| v <= *b)
            }
        },
    };
    walk.run(start(graph));
    let (_, actions) = best.ok_or_else(|| Error::InvalidPlan(Vec::new()))?;
    let plan = Plan::new(actions);
    let objectives = evaluate_plan(graph, vehicles, &plan, convention)?;
    Ok((plan, objectives))
}
