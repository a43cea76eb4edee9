use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Entrance, LineVisit, Scenario, TaskGraph, TaskGraphParts, TerminalMode, VehicleParams, WorkingLineNode};
use crate::num::Scalar;
use crate::scenario::layout::{FieldLayout, Router, Site};

pub const LAYOUT_VERSION: u32 = 1;

/// A working line of the task graph, anchored on the layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskLine {
    /// Index of the underlying layout line.
    pub source: usize,
    /// Where entrance 0 and entrance 1 sit.
    pub entrances: [Site; 2],
    pub length_m: f64,
}

/// Physical locations behind every node of a task graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSites {
    pub mode: TerminalMode,
    pub num_vehicles: usize,
    pub lines: Vec<TaskLine>,
    /// One per terminal slot: `M` in per-vehicle mode, one otherwise.
    pub starts: Vec<Site>,
    pub ends: Vec<Site>,
    pub pins: Vec<Option<LineVisit>>,
}

impl GraphSites {
    /// Every layout line, all terminals at the depot.
    pub fn full(layout: &FieldLayout, num_vehicles: usize, mode: TerminalMode) -> Self {
        Self::for_plots(layout, &(0..layout.plots.len()).collect::<Vec<_>>(), num_vehicles, mode)
    }

    /// Lines of the given plots in plot order, all terminals at the depot.
    pub fn for_plots(layout: &FieldLayout, plots: &[usize], num_vehicles: usize, mode: TerminalMode) -> Self {
        let lines = plots
            .iter()
            .flat_map(|&p| layout.plots[p].lines.iter().copied())
            .map(|i| {
                let l = &layout.lines[i];
                TaskLine {
                    source: i,
                    entrances: l.vertices.map(Site::vertex),
                    length_m: l.length_m,
                }
            })
            .collect();
        let slots = match mode {
            TerminalMode::PerVehicleTerminals => num_vehicles,
            TerminalMode::SingleDepot => 1,
        };
        let depot = Site::vertex(layout.depot);
        Self {
            mode,
            num_vehicles,
            lines,
            starts: vec![depot; slots],
            ends: vec![depot; slots],
            pins: vec![None; num_vehicles],
        }
    }

    pub fn entrance(&self, line: usize, entrance: Entrance) -> Site {
        self.lines[line].entrances[entrance.index()]
    }

    /// Terminal slot used by vehicle `k`.
    pub fn slot(&self, vehicle: usize) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => vehicle,
            TerminalMode::SingleDepot => 0,
        }
    }

    pub fn start(&self, vehicle: usize) -> Site {
        self.starts[self.slot(vehicle)]
    }

    pub fn end(&self, vehicle: usize) -> Site {
        self.ends[self.slot(vehicle)]
    }
}

fn reach(d: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Disconnected(what()))
    }
}

/// Task graph over all layout lines with terminals at the depot.
pub fn derive_task_graph<T: Scalar>(layout: &FieldLayout, num_vehicles: usize, mode: TerminalMode) -> Result<TaskGraph<T>> {
    derive_with_sites(layout, &GraphSites::full(layout, num_vehicles, mode))
}

/// Computes all entrance-to-entrance shortest distances for `sites`.
///
/// Distances between line pairs are computed once for `i < j` and
/// mirrored, so the result is exactly symmetric.
pub fn derive_with_sites<T: Scalar>(layout: &FieldLayout, sites: &GraphSites) -> Result<TaskGraph<T>> {
    let l = sites.lines.len();
    let m = sites.num_vehicles;
    let slots = match sites.mode {
        TerminalMode::PerVehicleTerminals => m,
        TerminalMode::SingleDepot => 1,
    };
    if sites.starts.len() != slots || sites.ends.len() != slots || sites.pins.len() != m {
        return Err(Error::MalformedGraph(format!("site tables must cover {slots} terminal slots and {m} vehicles")));
    }
    let mut router = Router::new(layout);
    let mut lines = Vec::with_capacity(l);
    for (i, tl) in sites.lines.iter().enumerate() {
        let a = tl.entrances[0].point(layout);
        let b = tl.entrances[1].point(layout);
        if !(tl.length_m > 0.0) {
            return Err(Error::MalformedGraph(format!("line {i} has non-positive length")));
        }
        lines.push(WorkingLineNode::line((b.y - a.y).atan2(b.x - a.x), T::of(tl.length_m)));
    }
    let mut line_distances = vec![[T::zero(); 4]; l * l];
    for i in 0..l {
        for j in i + 1..l {
            let mut fwd = [T::zero(); 4];
            let mut back = [T::zero(); 4];
            for a in Entrance::BOTH {
                for b in Entrance::BOTH {
                    let d = router.distance(&sites.entrance(i, a), &sites.entrance(j, b));
                    let d = T::of(reach(d, || format!("entrance {} of line {j} is unreachable from line {i}", b.index()))?);
                    fwd[2 * a.index() + b.index()] = d;
                    back[2 * b.index() + a.index()] = d;
                }
            }
            line_distances[i * l + j] = fwd;
            line_distances[j * l + i] = back;
        }
    }
    let mut start_distances = Vec::with_capacity(slots * l);
    let mut end_distances = Vec::with_capacity(slots * l);
    for s in 0..slots {
        for j in 0..l {
            let mut to = [T::zero(); 2];
            let mut from = [T::zero(); 2];
            for e in Entrance::BOTH {
                let site = sites.entrance(j, e);
                let what = || format!("entrance {} of line {j} is unreachable from terminal {s}", e.index());
                to[e.index()] = T::of(reach(router.distance(&sites.starts[s], &site), what)?);
                from[e.index()] = T::of(reach(router.distance(&site, &sites.ends[s]), what)?);
            }
            start_distances.push(to);
            end_distances.push(from);
        }
    }
    let direct_return = (0..m)
        .map(|k| {
            let d = router.distance(&sites.start(k), &sites.end(k));
            reach(d, || format!("vehicle {k} cannot reach its end terminal")).map(T::of)
        })
        .collect::<Result<Vec<_>>>()?;
    TaskGraph::from_parts(TaskGraphParts {
        mode: sites.mode,
        num_vehicles: m,
        lines,
        line_distances,
        start_distances,
        end_distances,
        direct_return,
        pins: sites.pins.clone(),
        line_plots: Some(sites.lines.iter().map(|t| layout.lines[t.source].plot).collect()),
    })
}

/// A scenario together with the geometry it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub layout: Arc<FieldLayout>,
    pub sites: GraphSites,
    pub scenario: Scenario<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(layout: Arc<FieldLayout>, sites: GraphSites, vehicles: Vec<VehicleParams<T>>) -> Result<Self> {
        let graph = derive_with_sites(&layout, &sites)?;
        let scenario = Scenario::new(graph, vehicles)?;
        Ok(Self { layout, sites, scenario })
    }

    pub fn layout_file(&self) -> LayoutFile {
        LayoutFile {
            version: LAYOUT_VERSION,
            layout: (*self.layout).clone(),
            sites: self.sites.clone(),
        }
    }

    /// Rebuilds an instance from a scenario and its layout sidecar,
    /// checking that the sidecar reproduces the scenario's graph.
    pub fn from_parts(scenario: Scenario<T>, file: LayoutFile) -> Result<Self> {
        file.check_version()?;
        let graph = derive_with_sites::<T>(&file.layout, &file.sites)?;
        if graph != scenario.graph {
            return Err(Error::MalformedGraph("layout file does not match the scenario graph".into()));
        }
        Ok(Self {
            layout: Arc::new(file.layout),
            sites: file.sites,
            scenario,
        })
    }
}

/// Layout sidecar written next to a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub version: u32,
    pub layout: FieldLayout,
    pub sites: GraphSites,
}

impl LayoutFile {
    fn check_version(&self) -> Result<()> {
        if self.version != LAYOUT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: LAYOUT_VERSION,
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        let text = serde_json::to_string(self)? + "\n";
        std::fs::write(path, text).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let file: LayoutFile = serde_json::from_str(&text)?;
        file.check_version()?;
        Ok(file)
    }

    /// Sidecar path for a scenario file: `farm.json` becomes `farm.layout.json`.
    pub fn sidecar_path(scenario_path: &FsPath) -> std::path::PathBuf {
        let stem = scenario_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        scenario_path.with_file_name(format!("{stem}.layout.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::layout::tests::square;
    use crate::scenario::{generate_scenario, ScenarioSpec};

    /// Floyd-Warshall over the road graph plus direct line segments
    /// between sites; independent of the Dijkstra router.
    fn floyd_vertex_distances(layout: &FieldLayout) -> Vec<Vec<f64>> {
        let n = layout.vertices.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for r in &layout.roads {
            d[r.a][r.b] = d[r.a][r.b].min(r.length_m);
            d[r.b][r.a] = d[r.b][r.a].min(r.length_m);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn matches_floyd_warshall_oracle() {
        for seed in 0..5 {
            let g = generate_scenario(&ScenarioSpec::new(2, 2, seed)).unwrap();
            let fw = floyd_vertex_distances(&g.layout);
            let graph = derive_task_graph::<f64>(&g.layout, 2, TerminalMode::SingleDepot).unwrap();
            let l = graph.num_lines();
            let v = |i: usize, e: Entrance| g.layout.lines[g.sites.lines[i].source].vertices[e.index()];
            for i in 0..l {
                for e in Entrance::BOTH {
                    assert_eq!(graph.start_to_line(0, i, e), fw[g.layout.depot][v(i, e)]);
                    assert_eq!(graph.line_to_end(i, e, 0), fw[v(i, e)][g.layout.depot]);
                    for j in 0..l {
                        if i == j {
                            continue;
                        }
                        for f in Entrance::BOTH {
                            assert_eq!(graph.line_to_line(i, e, j, f), fw[v(i, e)][v(j, f)]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_and_triangle() {
        let g = generate_scenario(&ScenarioSpec::new(3, 2, 11)).unwrap();
        let graph = derive_task_graph::<f64>(&g.layout, 2, TerminalMode::PerVehicleTerminals).unwrap();
        let l = graph.num_lines();
        for i in 0..l {
            for j in 0..l {
                for k in 0..l {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    for a in Entrance::BOTH {
                        for c in Entrance::BOTH {
                            let direct = graph.line_to_line(i, a, k, c);
                            // via an entrance of j, travelled as transfer only
                            for b in Entrance::BOTH {
                                let via = graph.line_to_line(i, a, j, b) + graph.line_to_line(j, b, k, c);
                                assert!(direct <= via + 1e-9);
                            }
                            assert_eq!(direct, graph.line_to_line(k, c, i, a));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_edge_distance() {
        let layout = square();
        let mut sites = GraphSites::full(&layout, 1, TerminalMode::SingleDepot);
        sites.starts = vec![Site::vertex(0)];
        sites.ends = vec![Site::vertex(0)];
        let graph = derive_with_sites::<f64>(&layout, &sites).unwrap();
        // the only line runs from vertex 1 to vertex 3, both 10 m from vertex 0
        assert_eq!(graph.start_to_line(0, 0, Entrance::Zero), 10.0);
        assert_eq!(graph.line_to_end(0, Entrance::One, 0), 10.0);
    }

    #[test]
    fn disconnected_entrance_is_reported() {
        let mut layout = square();
        layout.roads.retain(|r| r.a != 3 && r.b != 3);
        let sites = GraphSites::full(&layout, 1, TerminalMode::SingleDepot);
        match derive_with_sites::<f64>(&layout, &sites) {
            Err(Error::Disconnected(msg)) => assert!(msg.contains("entrance 1 of line 0")),
            other => panic!("expected disconnection, got {other:?}"),
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let g = generate_scenario(&ScenarioSpec::new(2, 3, 5)).unwrap();
        let inst = g.instance::<f64>().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("farm.json");
        inst.scenario.save(&path).unwrap();
        let side = LayoutFile::sidecar_path(&path);
        inst.layout_file().save(&side).unwrap();
        let back = Instance::from_parts(Scenario::load(&path).unwrap(), LayoutFile::load(&side).unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn f32_derivation_is_symmetric() {
        let g = generate_scenario(&ScenarioSpec::new(2, 2, 8)).unwrap();
        let inst = g.instance::<f32>().unwrap();
        assert_eq!(inst.scenario.graph.num_lines(), g.layout.lines.len());
    }
}
