//! Sequential decision environment over a task graph.
//!
//! Actions are flattened `(line, entrance)` pairs, index `2 * line +
//! entrance`, plus the separator at index `2L`. An episode always takes
//! exactly `L + M - 1` steps: once every line is chosen, only separators
//! remain legal until all `M - 1` are used.

mod client;
mod policy;
pub mod protocol;
mod server;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, LineVisit, Plan, Scenario, TaskGraph, VehicleParams};
use crate::num::Scalar;
use crate::objectives::{
    closing_leg, combine_reward, finish, vehicle_duration, Cursor, FuelConvention,
    ObjectiveVector, RewardConfig, StepRewards, VehicleTotals,
};

pub use client::{LineClient, RemotePolicy};
pub use policy::{rollout, GreedyPolicy, Policy, Rollout, UniformRandomPolicy};
pub use protocol::{Hub, WireAction, PROTOCOL_VERSION};
pub use server::{serve, serve_stdio, serve_stream, serve_tcp, ServerConfig, Transport};

/// Episode state. A pure function of the scenario and the action history.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState<T> {
    selected: Vec<bool>,
    remaining: usize,
    separators: usize,
    vehicle: usize,
    cursor: Cursor,
    totals: Vec<VehicleTotals<T>>,
    fleet_transfer: T,
    sums: StepRewards<T>,
    actions: Vec<Action>,
}

/// Transfer and work added to one vehicle by a step.
#[derive(Clone, Copy, Debug)]
struct Delta<T> {
    vehicle: usize,
    transfer: T,
    work: T,
}

/// Everything a step changes, computed before anything is applied.
struct Effect<T> {
    amount: T,
    deltas: [Option<Delta<T>>; 2],
    next_cursor: Cursor,
    next_vehicle: usize,
}

impl<T: Scalar> EpisodeState<T> {
    pub fn new(graph: &TaskGraph<T>) -> Self {
        let m = graph.num_vehicles();
        let mut state = Self {
            selected: vec![false; graph.num_lines()],
            remaining: graph.num_lines(),
            separators: 0,
            vehicle: 0,
            cursor: Cursor::Start(0),
            totals: vec![VehicleTotals::default(); m],
            fleet_transfer: T::zero(),
            sums: StepRewards::default(),
            actions: Vec::with_capacity(graph.num_lines() + m - 1),
        };
        if graph.num_lines() == 0 && m == 1 {
            // nothing to decide: the lone vehicle goes straight home
            let direct = graph.direct_return(0);
            state.totals[0].distance = direct;
            state.fleet_transfer = direct;
        }
        state
    }

    /// Rebuilds the state reached by `actions`.
    pub fn replay(scenario: &Scenario<T>, convention: FuelConvention, actions: &[Action]) -> Result<Self> {
        let mut state = Self::new(&scenario.graph);
        for &a in actions {
            state.apply(scenario, convention, a)?;
        }
        Ok(state)
    }

    pub fn is_done(&self) -> bool {
        self.remaining == 0 && self.separators + 1 == self.totals.len()
    }

    pub fn current_vehicle(&self) -> usize {
        self.vehicle
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    pub fn separator_count(&self) -> usize {
        self.separators
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    pub fn remaining_lines(&self) -> usize {
        self.remaining
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn plan(&self) -> Plan {
        Plan::new(self.actions.clone())
    }

    /// Running per-vehicle times `t_m`.
    pub fn times(&self) -> Vec<T> {
        self.totals.iter().map(|t| t.time).collect()
    }

    pub fn totals(&self) -> &[VehicleTotals<T>] {
        &self.totals
    }

    /// Accumulated reward channels.
    pub fn reward_sums(&self) -> StepRewards<T> {
        self.sums
    }

    pub fn is_legal(&self, graph: &TaskGraph<T>, action: Action) -> bool {
        self.why_illegal(graph, action).is_none()
    }

    fn why_illegal(&self, graph: &TaskGraph<T>, action: Action) -> Option<&'static str> {
        if self.is_done() {
            return Some("episode is finished");
        }
        let pending_pin = match self.cursor {
            Cursor::Start(k) => graph.pin(k),
            Cursor::After(_) => None,
        };
        match action {
            Action::Separator => {
                if self.separators + 1 >= self.totals.len() {
                    Some("all separators are used")
                } else if pending_pin.is_some() {
                    Some("vehicle must first finish its pinned line")
                } else {
                    None
                }
            }
            Action::Visit(v) => {
                if v.line >= self.selected.len() {
                    Some("unknown line")
                } else if self.selected[v.line] {
                    Some("line already selected")
                } else if let Some(pin) = pending_pin {
                    (pin != v).then_some("vehicle must first finish its pinned line")
                } else if graph.pinned_vehicle(v.line).is_some() {
                    Some("line is pinned to another vehicle")
                } else {
                    None
                }
            }
        }
    }

    /// Legal-action bitmap of length `2L + 1`.
    pub fn mask(&self, graph: &TaskGraph<T>) -> Vec<bool> {
        let l = self.selected.len();
        let mut mask = vec![false; 2 * l + 1];
        self.fill_mask(graph, &mut mask);
        mask
    }

    pub fn fill_mask(&self, graph: &TaskGraph<T>, mask: &mut [bool]) {
        let l = self.selected.len();
        mask.fill(false);
        if self.is_done() {
            return;
        }
        let pending_pin = match self.cursor {
            Cursor::Start(k) => graph.pin(k),
            Cursor::After(_) => None,
        };
        if let Some(pin) = pending_pin {
            mask[2 * pin.line + pin.entrance.index()] = true;
            return;
        }
        for line in 0..l {
            if !self.selected[line] && graph.pinned_vehicle(line).is_none() {
                mask[2 * line] = true;
                mask[2 * line + 1] = true;
            }
        }
        mask[2 * l] = self.separators + 1 < self.totals.len();
    }

    fn effect(&self, graph: &TaskGraph<T>, action: Action) -> Result<Effect<T>> {
        if let Some(reason) = self.why_illegal(graph, action) {
            if self.is_done() {
                return Err(Error::EpisodeDone);
            }
            return Err(Error::IllegalAction {
                action: action.to_string(),
                reason: reason.to_string(),
            });
        }
        let k = self.vehicle;
        Ok(match action {
            Action::Visit(v) => {
                let leg = match self.cursor {
                    Cursor::Start(k) => graph.start_to_line(k, v.line, v.entrance),
                    Cursor::After(p) => graph.line_to_line(p.line, p.exit(), v.line, v.entrance),
                };
                let next = Cursor::After(v);
                let first = Some(Delta {
                    vehicle: k,
                    transfer: leg,
                    work: graph.line_length(v.line),
                });
                if self.remaining == 1 && self.separators + 1 == self.totals.len() {
                    let close = closing_leg(graph, next, k);
                    Effect {
                        amount: leg + close,
                        deltas: [
                            first,
                            Some(Delta {
                                vehicle: k,
                                transfer: close,
                                work: T::zero(),
                            }),
                        ],
                        next_cursor: next,
                        next_vehicle: k,
                    }
                } else {
                    Effect {
                        amount: leg,
                        deltas: [first, None],
                        next_cursor: next,
                        next_vehicle: k,
                    }
                }
            }
            Action::Separator => {
                let close = closing_leg(graph, self.cursor, k);
                let first = Some(Delta {
                    vehicle: k,
                    transfer: close,
                    work: T::zero(),
                });
                let last_step = self.remaining == 0 && self.separators + 2 == self.totals.len();
                if last_step {
                    let direct = graph.direct_return(k + 1);
                    Effect {
                        amount: close + direct,
                        deltas: [
                            first,
                            Some(Delta {
                                vehicle: k + 1,
                                transfer: direct,
                                work: T::zero(),
                            }),
                        ],
                        next_cursor: Cursor::Start(k + 1),
                        next_vehicle: k + 1,
                    }
                } else {
                    Effect {
                        amount: close,
                        deltas: [first, None],
                        next_cursor: Cursor::Start(k + 1),
                        next_vehicle: k + 1,
                    }
                }
            }
        })
    }

    fn rewards_of(&self, vehicles: &[VehicleParams<T>], convention: FuelConvention, effect: &Effect<T>) -> StepRewards<T> {
        let mut fuel = T::zero();
        let mut updated = T::zero();
        let mut touched: Vec<(usize, T, T)> = Vec::with_capacity(2);
        for d in effect.deltas.iter().flatten() {
            let v = &vehicles[d.vehicle];
            fuel = fuel + convention.fuel(v, d.transfer, d.work);
            let (s, w) = touched
                .iter()
                .rev()
                .find(|t| t.0 == d.vehicle)
                .map(|t| (t.1, t.2))
                .unwrap_or((self.totals[d.vehicle].distance, self.totals[d.vehicle].work));
            let (s, w) = (s + d.transfer, w + d.work);
            touched.push((d.vehicle, s, w));
            updated = updated.max(vehicle_duration(v, s, w));
        }
        let running = self.totals.iter().fold(T::zero(), |acc, t| acc.max(t.time));
        StepRewards {
            distance: effect.amount,
            time: (updated - running).max(T::zero()),
            fuel,
        }
    }

    /// Rewards `action` would earn, without taking it.
    pub fn preview(&self, scenario: &Scenario<T>, convention: FuelConvention, action: Action) -> Result<StepRewards<T>> {
        let effect = self.effect(&scenario.graph, action)?;
        Ok(self.rewards_of(&scenario.vehicles, convention, &effect))
    }

    /// Takes `action`; illegal actions leave the state untouched.
    pub fn apply(&mut self, scenario: &Scenario<T>, convention: FuelConvention, action: Action) -> Result<StepRewards<T>> {
        let effect = self.effect(&scenario.graph, action)?;
        let rewards = self.rewards_of(&scenario.vehicles, convention, &effect);
        for d in effect.deltas.iter().flatten() {
            let v = &scenario.vehicles[d.vehicle];
            let t = &mut self.totals[d.vehicle];
            t.distance = t.distance + d.transfer;
            t.work = t.work + d.work;
            t.time = vehicle_duration(v, t.distance, t.work);
            t.fuel = convention.fuel(v, t.distance, t.work);
        }
        self.fleet_transfer = self.fleet_transfer + effect.amount;
        match action {
            Action::Visit(v) => {
                self.selected[v.line] = true;
                self.remaining -= 1;
            }
            Action::Separator => self.separators += 1,
        }
        self.cursor = effect.next_cursor;
        self.vehicle = effect.next_vehicle;
        self.actions.push(action);
        self.sums = StepRewards {
            distance: self.sums.distance + rewards.distance,
            time: self.sums.time + rewards.time,
            fuel: self.sums.fuel + rewards.fuel,
        };
        Ok(rewards)
    }

    /// Objective vector of the finished episode; identical to
    /// evaluating the plan.
    pub fn objectives(&self, vehicles: &[VehicleParams<T>], convention: FuelConvention) -> Result<ObjectiveVector<T>> {
        if !self.is_done() {
            return Err(Error::EpisodeNotDone);
        }
        let per_vehicle = self
            .totals
            .iter()
            .map(|t| VehicleTotals {
                distance: t.distance,
                work: t.work,
                ..Default::default()
            })
            .collect();
        Ok(finish(per_vehicle, self.fleet_transfer, vehicles, convention))
    }
}

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult<T> {
    pub rewards: StepRewards<T>,
    pub combined: T,
    pub mask: Vec<bool>,
    pub done: bool,
}

/// An episode bound to a scenario and a reward configuration.
#[derive(Clone, Debug)]
pub struct Env<T> {
    scenario: Arc<Scenario<T>>,
    config: RewardConfig,
    global_step: u64,
    state: EpisodeState<T>,
}

impl<T: Scalar> Env<T> {
    pub fn new(scenario: Arc<Scenario<T>>, config: RewardConfig) -> Self {
        let state = EpisodeState::new(&scenario.graph);
        Self {
            scenario,
            config,
            global_step: 0,
            state,
        }
    }

    /// Starts a fresh episode and returns its mask. The global step
    /// counter, which drives the bonus schedule, carries on.
    pub fn reset(&mut self) -> Vec<bool> {
        self.state = EpisodeState::new(&self.scenario.graph);
        self.mask()
    }

    pub fn scenario(&self) -> &Arc<Scenario<T>> {
        &self.scenario
    }

    pub fn graph(&self) -> &TaskGraph<T> {
        &self.scenario.graph
    }

    pub fn config(&self) -> &RewardConfig {
        &self.config
    }

    pub fn state(&self) -> &EpisodeState<T> {
        &self.state
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn set_global_step(&mut self, step: u64) {
        self.global_step = step;
    }

    pub fn mask(&self) -> Vec<bool> {
        self.state.mask(&self.scenario.graph)
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done()
    }

    /// Number of steps an episode takes: `L + M - 1`.
    pub fn episode_length(&self) -> usize {
        self.graph().num_lines() + self.graph().num_vehicles() - 1
    }

    pub fn preview(&self, action: Action) -> Result<StepRewards<T>> {
        self.state.preview(&self.scenario, self.config.fuel_convention, action)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult<T>> {
        let rewards = self.state.apply(&self.scenario, self.config.fuel_convention, action)?;
        let combined = combine_reward(&rewards, &self.config, self.global_step);
        self.global_step += 1;
        Ok(StepResult {
            rewards,
            combined,
            mask: self.mask(),
            done: self.state.is_done(),
        })
    }

    /// Steps by flattened index.
    pub fn step_index(&mut self, index: usize) -> Result<StepResult<T>> {
        let l = self.graph().num_lines();
        let action = Action::from_index(index, l).ok_or_else(|| Error::IllegalAction {
            action: index.to_string(),
            reason: format!("index outside the action space of size {}", 2 * l + 1),
        })?;
        self.step(action)
    }

    pub fn objectives(&self) -> Result<ObjectiveVector<T>> {
        self.state.objectives(&self.scenario.vehicles, self.config.fuel_convention)
    }
}

/// Flattened index of a visit.
pub fn visit_index(visit: LineVisit) -> usize {
    2 * visit.line + visit.entrance.index()
}
