//! Plan objectives and per-step rewards.
//!
//! Costs are accumulated in a fixed order: per vehicle, transfer legs and
//! worked lengths are left folds in route order; the fleet transfer
//! distance is the left fold of per-step transfer amounts in plan order.
//! The environment and the exhaustive solver use the same order, which is
//! what makes their sums agree bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_plan, Action, Entrance, LineVisit, Plan, Route, TaskGraph, VehicleParams};
use crate::num::Scalar;

/// Optimisation target, written `s`, `t` and `c` on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Distance,
    Time,
    Fuel,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Distance, Objective::Time, Objective::Fuel];

    pub fn suffix(self) -> &'static str {
        match self {
            Objective::Distance => "s",
            Objective::Time => "t",
            Objective::Fuel => "c",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.suffix())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" | "distance" => Ok(Objective::Distance),
            "t" | "time" => Ok(Objective::Time),
            "c" | "fuel" => Ok(Objective::Fuel),
            other => Err(Error::Unknown {
                kind: "objective",
                value: other.to_string(),
            }),
        }
    }
}

/// How fuel is derived from distances and vehicle rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelConvention {
    /// Rate times duration: `c^f d/v^f + c^w l/v^w`, in litres.
    #[default]
    RateTime,
    /// `d/c^f + l/c^w`: distances divided by the rates.
    Reciprocal,
}

impl FromStr for FuelConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate_time" | "rate-time" => Ok(FuelConvention::RateTime),
            "reciprocal" => Ok(FuelConvention::Reciprocal),
            other => Err(Error::Unknown {
                kind: "fuel convention",
                value: other.to_string(),
            }),
        }
    }
}

impl FuelConvention {
    #[inline]
    pub fn fuel<T: Scalar>(self, vehicle: &VehicleParams<T>, transfer: T, work: T) -> T {
        match self {
            FuelConvention::RateTime => {
                vehicle.transfer_fuel_rate * (transfer / vehicle.transfer_speed)
                    + vehicle.work_fuel_rate * (work / vehicle.work_speed)
            }
            FuelConvention::Reciprocal => transfer / vehicle.transfer_fuel_rate + work / vehicle.work_fuel_rate,
        }
    }
}

#[inline]
pub fn vehicle_duration<T: Scalar>(vehicle: &VehicleParams<T>, transfer: T, work: T) -> T {
    transfer / vehicle.transfer_speed + work / vehicle.work_speed
}

/// Where a vehicle currently is in terms of the task graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cursor {
    /// At vehicle `k`'s start terminal.
    Start(usize),
    /// Just finished a line, standing at its exit entrance.
    After(LineVisit),
}

/// `r^s = d*(i, j, ē_i, e_j)`: transfer distance from the cursor to an entrance.
pub fn step_reward_distance<T: Scalar>(graph: &TaskGraph<T>, prev: Cursor, next: LineVisit) -> Result<T> {
    if next.line >= graph.num_lines() {
        return Err(Error::MissingEdge {
            from: cursor_node(graph, prev),
            to: graph.num_nodes() + next.line,
        });
    }
    match prev {
        Cursor::Start(k) => Ok(graph.start_to_line(k, next.line, next.entrance)),
        Cursor::After(p) if p.line == next.line => Err(Error::MissingEdge {
            from: graph.line_node(p.line),
            to: graph.line_node(next.line),
        }),
        Cursor::After(p) => Ok(graph.line_to_line(p.line, p.exit(), next.line, next.entrance)),
    }
}

fn cursor_node<T: Scalar>(graph: &TaskGraph<T>, c: Cursor) -> usize {
    match c {
        Cursor::Start(k) => graph.start_node(k),
        Cursor::After(v) => graph.line_node(v.line),
    }
}

/// Leg from the cursor to vehicle `k`'s end terminal.
#[inline]
pub fn closing_leg<T: Scalar>(graph: &TaskGraph<T>, cursor: Cursor, vehicle: usize) -> T {
    match cursor {
        Cursor::Start(_) => graph.direct_return(vehicle),
        Cursor::After(v) => graph.line_to_end(v.line, v.exit(), vehicle),
    }
}

/// Time of one route, start and end legs included.
pub fn vehicle_time<T: Scalar>(
    graph: &TaskGraph<T>,
    vehicle_index: usize,
    vehicle: &VehicleParams<T>,
    route: &[LineVisit],
) -> Result<T> {
    let (transfer, work) = route_lengths(graph, vehicle_index, route)?;
    Ok(vehicle_duration(vehicle, transfer, work))
}

/// Transfer distance and worked length of one route.
pub fn route_lengths<T: Scalar>(graph: &TaskGraph<T>, vehicle_index: usize, route: &[LineVisit]) -> Result<(T, T)> {
    let mut transfer = T::zero();
    let mut work = T::zero();
    let mut cursor = Cursor::Start(vehicle_index);
    for &visit in route {
        transfer = transfer + step_reward_distance(graph, cursor, visit)?;
        work = work + graph.line_length(visit.line);
        cursor = Cursor::After(visit);
    }
    transfer = transfer + closing_leg(graph, cursor, vehicle_index);
    Ok((transfer, work))
}

/// `r^t = max(t'_k - max_m t_m, 0)`.
#[inline]
pub fn time_increment_reward<T: Scalar>(times_before: &[T], updated_time: T) -> T {
    let running = times_before.iter().fold(T::zero(), |acc, &t| acc.max(t));
    (updated_time - running).max(T::zero())
}

/// `r^c` for a transfer of `transfer` metres followed by a line of `work` metres.
#[inline]
pub fn fuel_increment_reward<T: Scalar>(
    vehicle: &VehicleParams<T>,
    transfer: T,
    work: T,
    convention: FuelConvention,
) -> T {
    convention.fuel(vehicle, transfer, work)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleTotals<T> {
    /// Transfer (idle) distance in metres.
    pub distance: T,
    /// Worked line length in metres.
    pub work: T,
    pub time: T,
    pub fuel: T,
}

/// `s_P`, `t_P`, `c_P` plus per-vehicle breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector<T> {
    pub total_transfer_distance: T,
    pub makespan: T,
    pub total_fuel: T,
    pub total_work: T,
    pub per_vehicle: Vec<VehicleTotals<T>>,
}

impl<T: Scalar> ObjectiveVector<T> {
    pub fn get(&self, objective: Objective) -> T {
        match objective {
            Objective::Distance => self.total_transfer_distance,
            Objective::Time => self.makespan,
            Objective::Fuel => self.total_fuel,
        }
    }

    /// Transfer plus worked distance.
    pub fn total_distance(&self) -> T {
        self.total_transfer_distance + self.total_work
    }
}

/// Evaluates a valid plan.
pub fn evaluate_plan<T: Scalar>(
    graph: &TaskGraph<T>,
    vehicles: &[VehicleParams<T>],
    plan: &Plan,
    convention: FuelConvention,
) -> Result<ObjectiveVector<T>> {
    validate_plan(graph, plan).into_result()?;
    if vehicles.len() != graph.num_vehicles() {
        return Err(Error::MalformedGraph(format!(
            "{} vehicles supplied for a {}-vehicle graph",
            vehicles.len(),
            graph.num_vehicles()
        )));
    }
    Ok(evaluate_unchecked(graph, vehicles, &plan.actions, convention))
}

/// Evaluation without validation. The caller guarantees a valid plan.
pub(crate) fn evaluate_unchecked<T: Scalar>(
    graph: &TaskGraph<T>,
    vehicles: &[VehicleParams<T>],
    actions: &[Action],
    convention: FuelConvention,
) -> ObjectiveVector<T> {
    let m = graph.num_vehicles();
    let mut per_vehicle = vec![VehicleTotals::<T>::default(); m];
    let mut fleet_transfer = T::zero();
    let mut k = 0;
    let mut cursor = Cursor::Start(0);
    let last = actions.len().wrapping_sub(1);
    for (step, action) in actions.iter().enumerate() {
        let amount = match *action {
            Action::Visit(visit) => {
                let leg = match cursor {
                    Cursor::Start(k) => graph.start_to_line(k, visit.line, visit.entrance),
                    Cursor::After(p) => graph.line_to_line(p.line, p.exit(), visit.line, visit.entrance),
                };
                let totals = &mut per_vehicle[k];
                totals.distance = totals.distance + leg;
                totals.work = totals.work + graph.line_length(visit.line);
                cursor = Cursor::After(visit);
                if step == last {
                    let close = closing_leg(graph, cursor, k);
                    totals.distance = totals.distance + close;
                    leg + close
                } else {
                    leg
                }
            }
            Action::Separator => {
                let close = closing_leg(graph, cursor, k);
                per_vehicle[k].distance = per_vehicle[k].distance + close;
                k += 1;
                cursor = Cursor::Start(k);
                if step == last {
                    let direct = graph.direct_return(k);
                    per_vehicle[k].distance = per_vehicle[k].distance + direct;
                    close + direct
                } else {
                    close
                }
            }
        };
        fleet_transfer = fleet_transfer + amount;
    }
    if actions.is_empty() {
        let direct = graph.direct_return(0);
        per_vehicle[0].distance = direct;
        fleet_transfer = direct;
    }
    finish(per_vehicle, fleet_transfer, vehicles, convention)
}

pub(crate) fn finish<T: Scalar>(
    mut per_vehicle: Vec<VehicleTotals<T>>,
    fleet_transfer: T,
    vehicles: &[VehicleParams<T>],
    convention: FuelConvention,
) -> ObjectiveVector<T> {
    let mut makespan = T::zero();
    let mut fuel = T::zero();
    let mut work = T::zero();
    for (totals, vehicle) in per_vehicle.iter_mut().zip(vehicles) {
        totals.time = vehicle_duration(vehicle, totals.distance, totals.work);
        totals.fuel = convention.fuel(vehicle, totals.distance, totals.work);
        makespan = makespan.max(totals.time);
        fuel = fuel + totals.fuel;
        work = work + totals.work;
    }
    ObjectiveVector {
        total_transfer_distance: fleet_transfer,
        makespan,
        total_fuel: fuel,
        total_work: work,
        per_vehicle,
    }
}

/// Evaluates explicit per-vehicle routes.
pub fn evaluate_routes<T: Scalar>(
    graph: &TaskGraph<T>,
    vehicles: &[VehicleParams<T>],
    routes: &[Route],
    convention: FuelConvention,
) -> Result<ObjectiveVector<T>> {
    evaluate_plan(graph, vehicles, &crate::model::join_routes(routes), convention)
}

/// Per-step cost channels: metres, seconds, litres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRewards<T> {
    pub distance: T,
    pub time: T,
    pub fuel: T,
}

/// Divisors applied to each channel before combination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScales {
    pub distance: f64,
    pub time: f64,
    pub fuel: f64,
}

impl ChannelScales {
    pub const UNIT: ChannelScales = ChannelScales {
        distance: 1.0,
        time: 1.0,
        fuel: 1.0,
    };
}

/// Selects the learning signal and the distance bonus schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub objective: Objective,
    pub distance_bonus: bool,
    /// The time objective gets the bonus while `step < cutoff`; 0 keeps it on.
    pub distance_bonus_cutoff_steps: u64,
    #[serde(default)]
    pub fuel_convention: FuelConvention,
    /// Channel normalisation, typically random-arrangement means.
    #[serde(default)]
    pub normalization: Option<ChannelScales>,
}

impl RewardConfig {
    pub fn new(objective: Objective) -> Self {
        Self {
            objective,
            distance_bonus: false,
            distance_bonus_cutoff_steps: 0,
            fuel_convention: FuelConvention::RateTime,
            normalization: None,
        }
    }

    /// Bonus for the first 75,264 timesteps (seven epochs) on time and for
    /// the whole run on fuel.
    pub fn with_standard_bonus(objective: Objective) -> Self {
        let mut config = Self::new(objective);
        config.distance_bonus = objective != Objective::Distance;
        if objective == Objective::Time {
            config.distance_bonus_cutoff_steps = 75_264;
        }
        config
    }

    pub fn bonus_active(&self, step_index: u64) -> bool {
        if !self.distance_bonus {
            return false;
        }
        match self.objective {
            Objective::Distance => false,
            Objective::Time => self.distance_bonus_cutoff_steps == 0 || step_index < self.distance_bonus_cutoff_steps,
            Objective::Fuel => true,
        }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::new(Objective::Distance)
    }
}

/// Scalar cost fed to the learner. Bonus weight is 1.
pub fn combine_reward<T: Scalar>(rewards: &StepRewards<T>, config: &RewardConfig, step_index: u64) -> T {
    let scales = config.normalization.unwrap_or(ChannelScales::UNIT);
    let (main, scale) = match config.objective {
        Objective::Distance => (rewards.distance, scales.distance),
        Objective::Time => (rewards.time, scales.time),
        Objective::Fuel => (rewards.fuel, scales.fuel),
    };
    let mut combined = main / T::of(scale);
    if config.bonus_active(step_index) {
        combined = combined + rewards.distance / T::of(scales.distance);
    }
    combined
}

/// Entrance chosen for `line` in a plan, if it is visited.
pub fn entrance_of(plan: &Plan, line: usize) -> Option<Entrance> {
    plan.actions.iter().find_map(|a| match a {
        Action::Visit(v) if v.line == line => Some(v.entrance),
        _ => None,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{TaskGraphParts, TerminalMode, WorkingLineNode};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One 100 m line with the depot 50 m from both entrances.
    pub(crate) fn single_line() -> (TaskGraph<f64>, Vec<VehicleParams<f64>>) {
        let graph = TaskGraph::from_parts(TaskGraphParts {
            mode: TerminalMode::SingleDepot,
            num_vehicles: 1,
            lines: vec![WorkingLineNode::line(0.0, 100.0)],
            line_distances: vec![[0.0; 4]],
            start_distances: vec![[50.0, 50.0]],
            end_distances: vec![[50.0, 50.0]],
            direct_return: vec![0.0],
            pins: vec![None],
            line_plots: None,
        })
        .unwrap();
        (graph, vec![VehicleParams::new(1.0, 2.0, 0.01, 0.005)])
    }

    /// Random symmetric graph with arbitrary (non-metric) distances.
    pub(crate) fn random_graph(rng: &mut ChaCha8Rng, l: usize, m: usize, mode: TerminalMode) -> (TaskGraph<f64>, Vec<VehicleParams<f64>>) {
        let slots = if mode == TerminalMode::SingleDepot { 1 } else { m };
        let mut line_distances = vec![[0.0; 4]; l * l];
        for i in 0..l {
            for j in (i + 1)..l {
                let d: [f64; 4] = std::array::from_fn(|_| rng.gen_range(1.0..300.0));
                line_distances[i * l + j] = d;
                line_distances[j * l + i] = [d[0], d[2], d[1], d[3]];
            }
        }
        let graph = TaskGraph::from_parts(TaskGraphParts {
            mode,
            num_vehicles: m,
            lines: (0..l).map(|_| WorkingLineNode::line(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(20.0..200.0))).collect(),
            line_distances,
            start_distances: (0..slots * l).map(|_| [rng.gen_range(1.0..400.0), rng.gen_range(1.0..400.0)]).collect(),
            end_distances: (0..slots * l).map(|_| [rng.gen_range(1.0..400.0), rng.gen_range(1.0..400.0)]).collect(),
            direct_return: (0..m).map(|_| if mode == TerminalMode::SingleDepot { 0.0 } else { rng.gen_range(0.0..100.0) }).collect(),
            pins: vec![None; m],
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
        (graph, vehicles)
    }

    pub(crate) fn random_plan(rng: &mut ChaCha8Rng, l: usize, m: usize) -> Plan {
        let mut actions: Vec<Action> = (0..l)
            .map(|i| Action::visit(i, Entrance::from_index(rng.gen_range(0..2)).unwrap()))
            .collect();
        actions.extend(std::iter::repeat_n(Action::Separator, m - 1));
        actions.shuffle(rng);
        Plan::new(actions)
    }

    #[test]
    fn distance_reward_is_direct_lookup() {
        let mut parts = single_line().0.into_parts();
        parts.lines.push(WorkingLineNode::line(0.0, 10.0));
        parts.line_distances = vec![[0.0; 4], [1.0, 2.0, 37.5, 4.0], [1.0, 37.5, 2.0, 4.0], [0.0; 4]];
        parts.start_distances.push([1.0, 1.0]);
        parts.end_distances.push([1.0, 1.0]);
        let g = TaskGraph::from_parts(parts).unwrap();
        // entered line 0 at entrance 0, so it exits at 1, then line 1 entrance 0
        let prev = Cursor::After(LineVisit::new(0, Entrance::Zero));
        assert_eq!(step_reward_distance(&g, prev, LineVisit::new(1, Entrance::Zero)).unwrap(), 37.5);
        // self loop is not an edge
        assert!(matches!(
            step_reward_distance(&g, prev, LineVisit::new(0, Entrance::One)),
            Err(Error::MissingEdge { .. })
        ));
    }

    #[test]
    fn single_line_hand_arithmetic() {
        let (g, v) = single_line();
        let route = [LineVisit::new(0, Entrance::Zero)];
        assert_eq!(vehicle_time(&g, 0, &v[0], &route).unwrap(), 150.0);
        assert_eq!(vehicle_time(&g, 0, &v[0], &[]).unwrap(), 0.0);
        let plan = Plan::new(vec![Action::visit(0, Entrance::Zero)]);
        let obj = evaluate_plan(&g, &v, &plan, FuelConvention::RateTime).unwrap();
        assert_eq!(obj.total_transfer_distance, 100.0);
        assert_eq!(obj.makespan, 150.0);
        assert_eq!(obj.total_fuel, 1.25);
        assert_eq!(obj.total_distance(), 200.0);
    }

    #[test]
    fn time_increment_examples() {
        assert_eq!(time_increment_reward(&[100.0, 200.0], 150.0), 0.0);
        assert_eq!(time_increment_reward(&[100.0, 200.0], 230.0), 30.0);
    }

    #[test]
    fn fuel_increment_conventions() {
        let v = VehicleParams::new(1.0, 2.0, 0.01, 0.005);
        assert_eq!(fuel_increment_reward(&v, 100.0, 100.0, FuelConvention::RateTime), 1.25);
        assert_eq!(fuel_increment_reward(&v, 100.0, 100.0, FuelConvention::Reciprocal), 30000.0);
        for c in [FuelConvention::RateTime, FuelConvention::Reciprocal] {
            assert_eq!(fuel_increment_reward(&v, 0.0, 0.0, c), 0.0);
        }
        assert!(matches!("litres".parse::<FuelConvention>(), Err(Error::Unknown { .. })));
        assert_eq!("reciprocal".parse::<FuelConvention>().unwrap(), FuelConvention::Reciprocal);
    }

    #[test]
    fn combine_examples() {
        let r = StepRewards {
            distance: 10.0,
            time: 30.0,
            fuel: 2.0,
        };
        let mut time = RewardConfig::new(Objective::Time);
        time.distance_bonus = true;
        assert_eq!(combine_reward(&r, &time, 0), 40.0);
        time.distance_bonus_cutoff_steps = 5;
        assert_eq!(combine_reward(&r, &time, 4), 40.0);
        assert_eq!(combine_reward(&r, &time, 5), 30.0);
        assert_eq!(combine_reward(&r, &RewardConfig::new(Objective::Distance), 0), 10.0);
        assert_eq!(combine_reward(&r, &RewardConfig::new(Objective::Fuel), 0), 2.0);
        let fuel = RewardConfig::with_standard_bonus(Objective::Fuel);
        assert_eq!(combine_reward(&r, &fuel, 1_000_000), 12.0);
        let std_time = RewardConfig::with_standard_bonus(Objective::Time);
        assert_eq!(std_time.distance_bonus_cutoff_steps, 75_264);
        let mut normalized = time;
        normalized.distance_bonus_cutoff_steps = 0;
        normalized.normalization = Some(ChannelScales {
            distance: 10.0,
            time: 15.0,
            fuel: 1.0,
        });
        assert_eq!(combine_reward(&r, &normalized, 0), 3.0);
    }

    #[test]
    fn swapping_identical_vehicles_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (g, mut v) = random_graph(&mut rng, 5, 2, TerminalMode::SingleDepot);
        v[1] = v[0];
        let a = Plan::new(vec![
            Action::visit(0, Entrance::Zero),
            Action::visit(3, Entrance::One),
            Action::Separator,
            Action::visit(1, Entrance::One),
            Action::visit(2, Entrance::Zero),
            Action::visit(4, Entrance::Zero),
        ]);
        let b = Plan::new(vec![
            Action::visit(1, Entrance::One),
            Action::visit(2, Entrance::Zero),
            Action::visit(4, Entrance::Zero),
            Action::Separator,
            Action::visit(0, Entrance::Zero),
            Action::visit(3, Entrance::One),
        ]);
        let oa = evaluate_plan(&g, &v, &a, FuelConvention::RateTime).unwrap();
        let ob = evaluate_plan(&g, &v, &b, FuelConvention::RateTime).unwrap();
        assert!((oa.total_transfer_distance - ob.total_transfer_distance).abs() < 1e-9);
        assert_eq!(oa.makespan, ob.makespan);
        assert!((oa.total_fuel - ob.total_fuel).abs() < 1e-12);
    }

    /// Independent leg-by-leg simulator: walks the plan keeping a clock per
    /// vehicle, advancing it by each leg and line duration.
    fn simulate_clock(g: &TaskGraph<f64>, v: &[VehicleParams<f64>], plan: &Plan) -> Vec<f64> {
        let routes = crate::model::split_into_routes(plan, g.num_vehicles()).unwrap();
        routes
            .iter()
            .enumerate()
            .map(|(k, route)| {
                let p = &v[k];
                let mut clock = 0.0;
                if route.is_empty() {
                    return g.direct_return(k) / p.transfer_speed;
                }
                clock += g.start_to_line(k, route[0].line, route[0].entrance) / p.transfer_speed;
                for w in route.windows(2) {
                    clock += g.line_length(w[0].line) / p.work_speed;
                    clock += g.line_to_line(w[0].line, w[0].exit(), w[1].line, w[1].entrance) / p.transfer_speed;
                }
                let last = route[route.len() - 1];
                clock += g.line_length(last.line) / p.work_speed;
                clock += g.line_to_end(last.line, last.exit(), k) / p.transfer_speed;
                clock
            })
            .collect()
    }

    #[test]
    fn vehicle_time_matches_step_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let l = rng.gen_range(1..9);
            let m = rng.gen_range(1..4);
            let mode = if rng.gen() { TerminalMode::SingleDepot } else { TerminalMode::PerVehicleTerminals };
            let (g, v) = random_graph(&mut rng, l, m, mode);
            let plan = random_plan(&mut rng, l, m);
            let clocks = simulate_clock(&g, &v, &plan);
            let routes = crate::model::split_into_routes(&plan, m).unwrap();
            for (k, route) in routes.iter().enumerate() {
                let t = vehicle_time(&g, k, &v[k], route).unwrap();
                assert!((t - clocks[k]).abs() <= 1e-9 * clocks[k].max(1.0));
            }
            let obj = evaluate_plan(&g, &v, &plan, FuelConvention::RateTime).unwrap();
            let max_clock = clocks.iter().cloned().fold(0.0, f64::max);
            assert!((obj.makespan - max_clock).abs() <= 1e-9 * max_clock);
        }
    }

    #[test]
    fn evaluate_rejects_invalid_plan() {
        let (g, v) = single_line();
        let plan = Plan::new(vec![Action::visit(0, Entrance::Zero), Action::visit(0, Entrance::One)]);
        assert!(matches!(
            evaluate_plan(&g, &v, &plan, FuelConvention::RateTime),
            Err(Error::InvalidPlan(_))
        ));
    }

    proptest! {
        #[test]
        fn scale_covariance(seed in any::<u64>(), lambda in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = rng.gen_range(1..8);
            let m = rng.gen_range(1..4);
            let (g, v) = random_graph(&mut rng, l, m, TerminalMode::PerVehicleTerminals);
            let plan = random_plan(&mut rng, l, m);
            let a = evaluate_plan(&g, &v, &plan, FuelConvention::RateTime).unwrap();
            let b = evaluate_plan(&g.scaled(lambda), &v, &plan, FuelConvention::RateTime).unwrap();
            let close = |x: f64, y: f64| (x * lambda - y).abs() <= 1e-9 * y.abs().max(1e-12);
            prop_assert!(close(a.total_transfer_distance, b.total_transfer_distance));
            prop_assert!(close(a.makespan, b.makespan));
            prop_assert!(close(a.total_fuel, b.total_fuel));
        }

        #[test]
        fn objectives_non_negative_and_makespan_is_max(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = rng.gen_range(0..8);
            let m = rng.gen_range(1..4);
            let (g, v) = random_graph(&mut rng, l, m, TerminalMode::SingleDepot);
            let plan = random_plan(&mut rng, l, m);
            for convention in [FuelConvention::RateTime, FuelConvention::Reciprocal] {
                let o = evaluate_plan(&g, &v, &plan, convention).unwrap();
                prop_assert!(o.total_transfer_distance >= 0.0 && o.total_fuel >= 0.0);
                let max = o.per_vehicle.iter().map(|p| p.time).fold(0.0, f64::max);
                prop_assert_eq!(o.makespan, max);
            }
        }
    }
}
