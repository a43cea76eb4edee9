//! Mid-operation snapshots and re-planning after the field grows or the
//! fleet shrinks.
//!
//! A snapshot replays a plan on the layout at transfer and working speed.
//! Segment boundaries are the cumulative `S/v^f + W/v^w` of the plan's own
//! distance folds, so a snapshot at the full makespan reproduces plan
//! evaluation exactly. Positions inside a segment are rounded down to the
//! length quantum, which keeps every split length exact.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{split_into_routes, validate_plan, Action, Entrance, LineVisit, Plan, Scenario, TerminalMode, VehicleParams};
use crate::objectives::{evaluate_plan, vehicle_duration, FuelConvention, ObjectiveVector, VehicleTotals};
use crate::scenario::{quantize_down, FieldLayout, GraphSites, Instance, Router, Site, TaskLine};

/// Where a vehicle is at the snapshot time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Position {
    /// Travelling, or waiting at a start or entrance, at `site`.
    Transfer { site: Site },
    /// Inside phase-1 line `line`, entered through `entrance`, `progress`
    /// metres in with `0 < progress < length`.
    Working { line: usize, entrance: Entrance, progress: f64, site: Site },
    /// Route complete, back at its end terminal.
    Finished { site: Site },
}

impl Position {
    pub fn site(&self) -> Site {
        match *self {
            Position::Transfer { site } | Position::Working { site, .. } | Position::Finished { site } => site,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub position: Position,
    /// Transfer distance, worked length, time and fuel used so far.
    pub consumed: VehicleTotals<f64>,
    /// Phase-1 lines finished, in order.
    pub completed: Vec<usize>,
    /// Phase-1 visits not yet started, in route order.
    pub pending: Vec<LineVisit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub fraction: f64,
    /// Seconds since the start of phase 1.
    pub time: f64,
    pub phase1_makespan: f64,
    pub convention: FuelConvention,
    pub vehicles: Vec<VehicleSnapshot>,
}

impl Snapshot {
    /// Phase-1 line indices finished by any vehicle.
    pub fn completed_lines(&self) -> BTreeSet<usize> {
        self.vehicles.iter().flat_map(|v| v.completed.iter().copied()).collect()
    }
}

/// Offset of an entrance site along its layout line.
fn line_offset(layout: &FieldLayout, source: usize, site: Site) -> f64 {
    match site {
        Site::Line { offset, .. } => offset,
        Site::Vertex { vertex } if vertex == layout.lines[source].vertices[0] => 0.0,
        _ => layout.lines[source].length_m,
    }
}

/// Simulates `plan` up to `fraction` of its makespan.
pub fn snapshot(instance: &Instance<f64>, plan: &Plan, fraction: f64, convention: FuelConvention) -> Result<Snapshot> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Dynamic(format!("snapshot fraction {fraction} is outside [0, 1]")));
    }
    let scenario = &instance.scenario;
    let graph = &scenario.graph;
    let sites = &instance.sites;
    let layout = &*instance.layout;
    let makespan = evaluate_plan(graph, &scenario.vehicles, plan, convention)?.makespan;
    let time = fraction * makespan;
    let routes = split_into_routes(plan, graph.num_vehicles())?;
    let mut router = Router::new(layout);
    let mut vehicles = Vec::with_capacity(routes.len());
    for (k, route) in routes.iter().enumerate() {
        let v = &scenario.vehicles[k];
        let mut s = 0.0;
        let mut w = 0.0;
        let mut here = sites.start(k);
        let mut completed = Vec::new();
        let consumed = |s: f64, w: f64| VehicleTotals {
            distance: s,
            work: w,
            time: vehicle_duration(v, s, w),
            fuel: convention.fuel(v, s, w),
        };
        let mut snap: Option<VehicleSnapshot> = None;
        for (i, visit) in route.iter().enumerate() {
            let leg = if i == 0 {
                graph.start_to_line(k, visit.line, visit.entrance)
            } else {
                let p = route[i - 1];
                graph.line_to_line(p.line, p.exit(), visit.line, visit.entrance)
            };
            let target = sites.entrance(visit.line, visit.entrance);
            let t0 = vehicle_duration(v, s, w);
            let s1 = s + leg;
            if time < vehicle_duration(v, s1, w) {
                let d = quantize_down((time - t0).max(0.0) * v.transfer_speed).min(leg);
                let site = router.path(&here, &target).site_at(layout, here, d);
                snap = Some(VehicleSnapshot {
                    position: Position::Transfer { site },
                    consumed: consumed(s + d, w),
                    completed: std::mem::take(&mut completed),
                    pending: route[i..].to_vec(),
                });
                break;
            }
            s = s1;
            let t0 = vehicle_duration(v, s, w);
            let length = graph.line_length(visit.line);
            let w1 = w + length;
            if time < vehicle_duration(v, s, w1) {
                let p = quantize_down((time - t0).max(0.0) * v.work_speed);
                if p <= 0.0 {
                    snap = Some(VehicleSnapshot {
                        position: Position::Transfer { site: target },
                        consumed: consumed(s, w),
                        completed: std::mem::take(&mut completed),
                        pending: route[i..].to_vec(),
                    });
                    break;
                }
                if p < length {
                    let tl = &sites.lines[visit.line];
                    let a = line_offset(layout, tl.source, tl.entrances[visit.entrance.index()]);
                    let b = line_offset(layout, tl.source, tl.entrances[visit.exit().index()]);
                    let offset = if a < b { a + p } else { a - p };
                    snap = Some(VehicleSnapshot {
                        position: Position::Working {
                            line: visit.line,
                            entrance: visit.entrance,
                            progress: p,
                            site: Site::Line {
                                line: tl.source,
                                offset,
                            },
                        },
                        consumed: consumed(s, w + p),
                        completed: std::mem::take(&mut completed),
                        pending: route[i + 1..].to_vec(),
                    });
                    break;
                }
            }
            w = w1;
            completed.push(visit.line);
            here = sites.entrance(visit.line, visit.exit());
        }
        let snap = match snap {
            Some(snap) => snap,
            None => {
                let close = match route.last() {
                    Some(last) => graph.line_to_end(last.line, last.exit(), k),
                    None => graph.direct_return(k),
                };
                let end = sites.end(k);
                let t0 = vehicle_duration(v, s, w);
                let s1 = s + close;
                if time < vehicle_duration(v, s1, w) {
                    let d = quantize_down((time - t0).max(0.0) * v.transfer_speed).min(close);
                    let site = router.path(&here, &end).site_at(layout, here, d);
                    VehicleSnapshot {
                        position: Position::Transfer { site },
                        consumed: consumed(s + d, w),
                        completed,
                        pending: Vec::new(),
                    }
                } else {
                    VehicleSnapshot {
                        position: Position::Finished { site: end },
                        consumed: consumed(s1, w),
                        completed,
                        pending: Vec::new(),
                    }
                }
            }
        };
        vehicles.push(snap);
    }
    Ok(Snapshot {
        fraction,
        time,
        phase1_makespan: makespan,
        convention,
        vehicles,
    })
}

/// Provenance of a phase-2 line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LineOrigin {
    /// Phase-1 line nobody has started.
    Untouched { line: usize },
    /// Unworked part of a phase-1 line.
    Remainder { line: usize, progress: f64 },
    /// Line of a newly added plot.
    Added { source: usize },
}

/// What a removed vehicle does when it is inside a line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MidLineRemoval {
    /// Finish the line, then head home.
    #[default]
    FinishLine,
    /// Leave at once; the rest of the line goes back into the pool.
    Abort,
}

/// Phase-2 problem: vehicles restart where the snapshot left them and
/// all end at the depot.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase2 {
    pub instance: Instance<f64>,
    /// Original index of each phase-2 vehicle.
    pub vehicles: Vec<usize>,
    pub origins: Vec<LineOrigin>,
}

fn build_phase2(
    instance: &Instance<f64>,
    snap: &Snapshot,
    active: &[usize],
    pooled_remainders: &[usize],
    added: Vec<TaskLine>,
) -> Result<Phase2> {
    let layout = instance.layout.clone();
    let depot = Site::vertex(layout.depot);
    let done = snap.completed_lines();
    let mut lines = Vec::new();
    let mut origins = Vec::new();
    let mut pins = vec![None; active.len()];
    for (i, tl) in instance.sites.lines.iter().enumerate() {
        if done.contains(&i) {
            continue;
        }
        let worker = snap.vehicles.iter().enumerate().find_map(|(k, v)| match v.position {
            Position::Working { line, entrance, progress, site } if line == i => Some((k, entrance, progress, site)),
            _ => None,
        });
        match worker {
            None => {
                lines.push(tl.clone());
                origins.push(LineOrigin::Untouched { line: i });
            }
            Some((k, entrance, progress, site)) => {
                let slot = active.iter().position(|&a| a == k);
                if slot.is_none() && !pooled_remainders.contains(&k) {
                    // finished by its removed vehicle
                    continue;
                }
                if let Some(slot) = slot {
                    pins[slot] = Some(LineVisit::new(lines.len(), Entrance::Zero));
                }
                lines.push(TaskLine {
                    source: tl.source,
                    entrances: [site, tl.entrances[entrance.opposite().index()]],
                    length_m: tl.length_m - progress,
                });
                origins.push(LineOrigin::Remainder { line: i, progress });
            }
        }
    }
    for tl in added {
        origins.push(LineOrigin::Added { source: tl.source });
        lines.push(tl);
    }
    let sites = GraphSites {
        mode: TerminalMode::PerVehicleTerminals,
        num_vehicles: active.len(),
        lines,
        starts: active.iter().map(|&k| snap.vehicles[k].position.site()).collect(),
        ends: vec![depot; active.len()],
        pins,
    };
    let vehicles = active.iter().map(|&k| instance.scenario.vehicles[k]).collect();
    Ok(Phase2 {
        instance: Instance::new(layout, sites, vehicles)?,
        vehicles: active.to_vec(),
        origins,
    })
}

/// Phase-2 cost of a removed vehicle heading home.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnLeg {
    pub vehicle: usize,
    pub totals: VehicleTotals<f64>,
}

/// Phase-1 consumption plus phase 2, per vehicle and for the fleet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedTotals {
    pub per_vehicle: Vec<VehicleTotals<f64>>,
    /// Fleet transfer distance.
    pub distance: f64,
    pub work: f64,
    /// Snapshot time plus the phase-2 makespan.
    pub makespan: f64,
    pub fuel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicOutcome {
    pub snapshot: Snapshot,
    pub phase2: Phase2,
    pub plan: Plan,
    pub phase2_objectives: ObjectiveVector<f64>,
    pub returns: Vec<ReturnLeg>,
    pub totals: CombinedTotals,
}

impl DynamicOutcome {
    pub fn record(&self) -> DynamicRecord {
        DynamicRecord {
            snapshot: self.snapshot.clone(),
            phase2_sites: self.phase2.instance.sites.clone(),
            phase2_vehicles: self.phase2.vehicles.clone(),
            origins: self.phase2.origins.clone(),
            plan: self.plan.clone(),
            phase2_objectives: self.phase2_objectives.clone(),
            returns: self.returns.clone(),
            totals: self.totals.clone(),
        }
    }
}

/// File form of a [`DynamicOutcome`]; the phase-2 instance is rebuilt from
/// the layout, `phase2_sites` and the phase-1 vehicles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicRecord {
    pub snapshot: Snapshot,
    pub phase2_sites: GraphSites,
    pub phase2_vehicles: Vec<usize>,
    pub origins: Vec<LineOrigin>,
    pub plan: Plan,
    pub phase2_objectives: ObjectiveVector<f64>,
    pub returns: Vec<ReturnLeg>,
    pub totals: CombinedTotals,
}

/// Re-planning callback: receives the phase-2 scenario, returns a plan.
pub type Replanner<'a> = dyn FnMut(&Arc<Scenario<f64>>) -> Result<Plan> + 'a;

fn finish_outcome(snap: Snapshot, phase2: Phase2, plan: Plan, returns: Vec<ReturnLeg>) -> Result<DynamicOutcome> {
    let scenario = &phase2.instance.scenario;
    let objectives = evaluate_plan(&scenario.graph, &scenario.vehicles, &plan, snap.convention)?;
    let mut per_vehicle: Vec<VehicleTotals<f64>> = snap.vehicles.iter().map(|v| v.consumed).collect();
    let add = |a: &mut VehicleTotals<f64>, b: &VehicleTotals<f64>| {
        a.distance += b.distance;
        a.work += b.work;
        a.time += b.time;
        a.fuel += b.fuel;
    };
    for (slot, &k) in phase2.vehicles.iter().enumerate() {
        add(&mut per_vehicle[k], &objectives.per_vehicle[slot]);
    }
    let mut tail = objectives.makespan;
    let mut distance = snap.vehicles.iter().map(|v| v.consumed.distance).sum::<f64>() + objectives.total_transfer_distance;
    let mut work = snap.vehicles.iter().map(|v| v.consumed.work).sum::<f64>() + objectives.total_work;
    let mut fuel = snap.vehicles.iter().map(|v| v.consumed.fuel).sum::<f64>() + objectives.total_fuel;
    for r in &returns {
        add(&mut per_vehicle[r.vehicle], &r.totals);
        tail = tail.max(r.totals.time);
        distance += r.totals.distance;
        work += r.totals.work;
        fuel += r.totals.fuel;
    }
    let totals = CombinedTotals {
        per_vehicle,
        distance,
        work,
        makespan: snap.time + tail,
        fuel,
    };
    Ok(DynamicOutcome {
        snapshot: snap,
        phase2,
        plan,
        phase2_objectives: objectives,
        returns,
        totals,
    })
}

fn check_replan(phase2: &Phase2, plan: &Plan) -> Result<()> {
    validate_plan(&phase2.instance.scenario.graph, plan)
        .into_result()
        .map_err(|e| Error::Dynamic(format!("re-planner returned an invalid plan: {e}")))
}

/// Adds the lines of `new_plots` to the unfinished work and re-plans the
/// whole fleet from its snapshot positions.
pub fn rearrange_field_increase(
    instance: &Instance<f64>,
    snap: Snapshot,
    new_plots: &[usize],
    replan: &mut Replanner<'_>,
) -> Result<DynamicOutcome> {
    let layout = &*instance.layout;
    let existing: BTreeSet<usize> = instance.sites.lines.iter().map(|t| layout.lines[t.source].plot).collect();
    let mut seen = BTreeSet::new();
    for &p in new_plots {
        if p >= layout.plots.len() {
            return Err(Error::Dynamic(format!("plot {p} does not exist")));
        }
        if existing.contains(&p) {
            return Err(Error::Dynamic(format!("plot {p} is already part of the phase-1 field")));
        }
        if !seen.insert(p) {
            return Err(Error::Dynamic(format!("plot {p} is listed twice")));
        }
    }
    let added = GraphSites::for_plots(layout, new_plots, 1, TerminalMode::SingleDepot).lines;
    let active: Vec<usize> = (0..snap.vehicles.len()).collect();
    let phase2 = build_phase2(instance, &snap, &active, &[], added)?;
    let scenario = Arc::new(phase2.instance.scenario.clone());
    let plan = replan(&scenario)?;
    check_replan(&phase2, &plan)?;
    finish_outcome(snap, phase2, plan, Vec::new())
}

/// Sends `removed` vehicles home and re-plans the unfinished work for the
/// rest of the fleet.
pub fn rearrange_vehicle_decrease(
    instance: &Instance<f64>,
    snap: Snapshot,
    removed: &[usize],
    mid_line: MidLineRemoval,
    replan: &mut Replanner<'_>,
) -> Result<DynamicOutcome> {
    let m = snap.vehicles.len();
    let removed: BTreeSet<usize> = removed.iter().copied().collect();
    if let Some(&k) = removed.iter().find(|&&k| k >= m) {
        return Err(Error::Dynamic(format!("vehicle {k} does not exist")));
    }
    if removed.len() == m {
        return Err(Error::Dynamic("at least one vehicle must remain".into()));
    }
    let active: Vec<usize> = (0..m).filter(|k| !removed.contains(k)).collect();
    let layout = &*instance.layout;
    let depot = Site::vertex(layout.depot);
    let mut router = Router::new(layout);
    let mut pooled = Vec::new();
    let mut returns = Vec::new();
    for &k in &removed {
        let v: &VehicleParams<f64> = &instance.scenario.vehicles[k];
        let snapv = &snap.vehicles[k];
        let (from, work) = match (snapv.position, mid_line) {
            (Position::Working { line, entrance, progress, .. }, MidLineRemoval::FinishLine) => {
                let tl = &instance.sites.lines[line];
                (tl.entrances[entrance.opposite().index()], tl.length_m - progress)
            }
            (Position::Working { site, .. }, MidLineRemoval::Abort) => {
                pooled.push(k);
                (site, 0.0)
            }
            (p, _) => (p.site(), 0.0),
        };
        let distance = match snapv.position {
            Position::Finished { .. } => 0.0,
            _ => router.distance(&from, &depot),
        };
        returns.push(ReturnLeg {
            vehicle: k,
            totals: VehicleTotals {
                distance,
                work,
                time: vehicle_duration(v, distance, work),
                fuel: snap.convention.fuel(v, distance, work),
            },
        });
    }
    let phase2 = build_phase2(instance, &snap, &active, &pooled, Vec::new())?;
    let scenario = Arc::new(phase2.instance.scenario.clone());
    let plan = replan(&scenario)?;
    check_replan(&phase2, &plan)?;
    finish_outcome(snap, phase2, plan, returns)
}

/// The rest of the phase-1 plan expressed on a phase-2 graph that kept
/// every vehicle and added nothing.
pub fn continuation_plan(phase2: &Phase2, snap: &Snapshot) -> Result<Plan> {
    let index_of = |origin: LineOrigin| phase2.origins.iter().position(|&o| o == origin);
    let mut routes = Vec::with_capacity(phase2.vehicles.len());
    for &k in &phase2.vehicles {
        let v = &snap.vehicles[k];
        let mut route = Vec::new();
        if let Position::Working { line, progress, .. } = v.position {
            let r = index_of(LineOrigin::Remainder { line, progress })
                .ok_or_else(|| Error::Dynamic(format!("remainder of line {line} is missing")))?;
            route.push(LineVisit::new(r, Entrance::Zero));
        }
        for visit in &v.pending {
            let i = index_of(LineOrigin::Untouched { line: visit.line })
                .ok_or_else(|| Error::Dynamic(format!("line {} is missing from phase 2", visit.line)))?;
            route.push(LineVisit::new(i, visit.entrance));
        }
        routes.push(route);
    }
    Ok(crate::model::join_routes(&routes))
}

/// Every action of a plan, for iteration convenience.
pub fn visits(plan: &Plan) -> impl Iterator<Item = LineVisit> + '_ {
    plan.actions.iter().filter_map(|a| match a {
        Action::Visit(v) => Some(*v),
        Action::Separator => None,
    })
}
