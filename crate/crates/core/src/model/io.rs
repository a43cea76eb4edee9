//! Scenario and plan files.
//!
//! Scenario files are compact JSON with a fixed field order. Floats are
//! written in shortest round-trip form and parsed exactly, so writing a
//! parsed canonical file reproduces it byte for byte.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Entrance, LineVisit, Plan, TaskGraph, TaskGraphParts, TerminalMode, VehicleParams, WorkingLineNode};
use crate::num::Scalar;

pub const SCENARIO_VERSION: u32 = 1;
const PLAN_VERSION: u32 = 1;

/// On-disk layout of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile<T> {
    pub version: u32,
    pub num_vehicles: usize,
    pub num_lines: usize,
    pub mode: TerminalMode,
    /// `[cos θ, sin θ, l]` for every node in graph order.
    pub nodes: Vec<[T; 3]>,
    /// `[v^w, v^f, c^w, c^f]` per vehicle.
    pub vehicles: Vec<[T; 4]>,
    /// Dense `N × N` matrix of `[d00, d01, d10, d11]`, `null` where unconnected.
    pub edges: Vec<Vec<Option<[T; 4]>>>,
    pub direct_return: Vec<T>,
    pub pins: Vec<Option<(usize, Entrance)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_plots: Option<Vec<usize>>,
}

/// A task graph together with its fleet.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub graph: TaskGraph<T>,
    pub vehicles: Vec<VehicleParams<T>>,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(graph: TaskGraph<T>, vehicles: Vec<VehicleParams<T>>) -> Result<Self> {
        if vehicles.len() != graph.num_vehicles() {
            return Err(Error::MalformedGraph(format!(
                "graph expects {} vehicles, got {}",
                graph.num_vehicles(),
                vehicles.len()
            )));
        }
        for (k, v) in vehicles.iter().enumerate() {
            v.validate(k)?;
        }
        Ok(Self { graph, vehicles })
    }

    pub fn to_file(&self) -> ScenarioFile<T> {
        let g = &self.graph;
        ScenarioFile {
            version: SCENARIO_VERSION,
            num_vehicles: g.num_vehicles(),
            num_lines: g.num_lines(),
            mode: g.mode(),
            nodes: g.node_features().into_iter().map(WorkingLineNode::to_array).collect(),
            vehicles: self.vehicles.iter().map(|v| v.to_array()).collect(),
            edges: g.edge_matrix(),
            direct_return: (0..g.num_vehicles()).map(|k| g.direct_return(k)).collect(),
            pins: g.pins().iter().map(|p| p.map(|p| (p.line, p.entrance))).collect(),
            line_plots: g.line_plots().map(<[usize]>::to_vec),
        }
    }

    pub fn from_file(file: ScenarioFile<T>) -> Result<Self> {
        if file.version != SCENARIO_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: SCENARIO_VERSION,
            });
        }
        let m = file.num_vehicles;
        let l = file.num_lines;
        let bad = |msg: String| Error::MalformedGraph(msg);
        let (slots, first_line) = match file.mode {
            TerminalMode::PerVehicleTerminals => (m, m),
            TerminalMode::SingleDepot => (1, 1),
        };
        let n = match file.mode {
            TerminalMode::PerVehicleTerminals => l + 2 * m,
            TerminalMode::SingleDepot => l + 1,
        };
        if file.nodes.len() != n || file.edges.len() != n || file.edges.iter().any(|row| row.len() != n) {
            return Err(bad(format!("expected {n} nodes and an {n}x{n} edge matrix")));
        }
        let end_first = match file.mode {
            TerminalMode::PerVehicleTerminals => m + l,
            TerminalMode::SingleDepot => 0,
        };
        let edge = |i: usize, j: usize| -> Result<[T; 4]> {
            file.edges[i][j].ok_or_else(|| bad(format!("missing edge {i} -> {j}")))
        };
        let lines = (0..l)
            .map(|i| {
                let [c, s, len] = file.nodes[first_line + i];
                WorkingLineNode {
                    direction_cos: c,
                    direction_sin: s,
                    length_m: len,
                }
            })
            .collect();
        for (i, node) in file.nodes.iter().enumerate() {
            let is_line = i >= first_line && i < first_line + l;
            if !is_line && node.iter().any(|x| *x != T::zero()) {
                return Err(bad(format!("terminal node {i} must have zero features")));
            }
        }
        let mut line_distances = Vec::with_capacity(l * l);
        for i in 0..l {
            for j in 0..l {
                line_distances.push(if i == j {
                    [T::zero(); 4]
                } else {
                    edge(first_line + i, first_line + j)?
                });
            }
        }
        let mut start_distances = Vec::with_capacity(slots * l);
        let mut end_distances = Vec::with_capacity(slots * l);
        for slot in 0..slots {
            for j in 0..l {
                let [a, b, c, d] = edge(slot, first_line + j)?;
                if a != c || b != d {
                    return Err(bad(format!("terminal {slot} entrance slots differ")));
                }
                start_distances.push([a, b]);
            }
        }
        for slot in 0..slots {
            for i in 0..l {
                let [a, b, c, d] = edge(first_line + i, end_first + slot)?;
                if a != b || c != d {
                    return Err(bad(format!("terminal {} entrance slots differ", end_first + slot)));
                }
                end_distances.push([a, c]);
            }
        }
        let pins = if file.pins.is_empty() {
            vec![None; m]
        } else {
            file.pins.iter().map(|p| p.map(|(line, e)| LineVisit::new(line, e))).collect()
        };
        let graph = TaskGraph::from_parts(TaskGraphParts {
            mode: file.mode,
            num_vehicles: m,
            lines,
            line_distances,
            start_distances,
            end_distances,
            direct_return: file.direct_return,
            pins,
            line_plots: file.line_plots,
        })?;
        // Reject edges the connectivity rules forbid.
        for i in 0..n {
            for j in 0..n {
                if file.edges[i][j].is_some() != graph.edge(i, j).is_some() {
                    return Err(bad(format!("edge {i} -> {j} violates task graph connectivity")));
                }
            }
        }
        let vehicles = file.vehicles.into_iter().map(VehicleParams::from_array).collect();
        Self::new(graph, vehicles)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_file()).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn cast<U: Scalar>(&self) -> Result<Scenario<U>> {
        let graph = self.graph.cast::<U>()?;
        let vehicles = self
            .vehicles
            .iter()
            .map(|v| VehicleParams::from_array(v.to_array().map(|x| U::of(x.as_f64()))))
            .collect();
        Scenario::new(graph, vehicles)
    }
}

/// On-disk plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub version: u32,
    pub actions: Vec<(i64, i64)>,
}

impl PlanFile {
    pub fn from_plan(plan: &Plan) -> Self {
        Self {
            version: PLAN_VERSION,
            actions: plan.to_pairs(),
        }
    }

    pub fn to_plan(&self) -> Result<Plan> {
        if self.version != PLAN_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: PLAN_VERSION,
            });
        }
        Plan::from_pairs(&self.actions)
    }

    pub fn save(plan: &Plan, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string(&Self::from_plan(plan))?;
        s.push('\n');
        fs::write(path, s).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Plan> {
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str::<Self>(&text)?.to_plan()
    }
}
