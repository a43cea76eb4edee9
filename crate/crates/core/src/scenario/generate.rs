use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TerminalMode, VehicleParams};
use crate::scenario::derive::{GraphSites, Instance};
use crate::scenario::geometry::{quantize, Bounds, Point};
use crate::scenario::layout::{FieldLayout, FieldLine, Plot, RoadEdge, Site};
use crate::num::Scalar;

/// Road corridor width between plot cells, metres.
const CORRIDOR_M: f64 = 30.0;

/// Sampling ranges for vehicle parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRanges {
    pub work_speed: (f64, f64),
    /// Lower bound is `max(v^w, floor)`.
    pub transfer_speed_floor: f64,
    pub transfer_speed_max: f64,
    pub transfer_fuel: (f64, f64),
    /// Lower bound is `max(c^f, floor)`.
    pub work_fuel_floor: f64,
    pub work_fuel_max: f64,
}

impl Default for VehicleRanges {
    fn default() -> Self {
        Self {
            work_speed: (1.0, 3.3),
            transfer_speed_floor: 2.0,
            transfer_speed_max: 6.94,
            transfer_fuel: (0.005, 0.008),
            work_fuel_floor: 0.007,
            work_fuel_max: 0.01,
        }
    }
}

/// Draws `[v^w, v^f, c^w, c^f]` with `v^f >= v^w` and `c^w >= c^f`.
pub fn sample_vehicle<R: Rng + ?Sized>(rng: &mut R, ranges: &VehicleRanges) -> VehicleParams<f64> {
    let vw = rng.gen_range(ranges.work_speed.0..=ranges.work_speed.1);
    let vf = rng.gen_range(vw.max(ranges.transfer_speed_floor)..=ranges.transfer_speed_max);
    let cf = rng.gen_range(ranges.transfer_fuel.0..=ranges.transfer_fuel.1);
    let cw = rng.gen_range(cf.max(ranges.work_fuel_floor)..=ranges.work_fuel_max);
    VehicleParams::new(vw, vf, cw, cf)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalPlacement {
    /// Every vehicle starts and ends at the depot.
    #[default]
    Depot,
    /// Vehicles start at random road junctions and end at the depot.
    RandomJunctions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub num_plots: usize,
    pub num_vehicles: usize,
    pub seed: u64,
    pub mode: TerminalMode,
    pub terminals: TerminalPlacement,
    pub lines_per_plot: (usize, usize),
    pub line_spacing_m: (f64, f64),
    pub line_length_m: (f64, f64),
    pub vehicles: VehicleRanges,
}

impl ScenarioSpec {
    pub fn new(num_plots: usize, num_vehicles: usize, seed: u64) -> Self {
        Self {
            num_plots,
            num_vehicles,
            seed,
            mode: TerminalMode::SingleDepot,
            terminals: TerminalPlacement::Depot,
            lines_per_plot: (5, 15),
            line_spacing_m: (4.0, 10.0),
            line_length_m: (80.0, 250.0),
            vehicles: VehicleRanges::default(),
        }
    }

    /// Plot and vehicle counts drawn uniformly from {2, ..., 6}.
    pub fn sampled(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let plots = rng.gen_range(2..=6);
        let vehicles = rng.gen_range(2..=6);
        Self::new(plots, vehicles, seed)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.num_plots == 0 {
            return bad("at least one plot is required");
        }
        if self.num_vehicles == 0 {
            return bad("at least one vehicle is required");
        }
        if self.lines_per_plot.0 == 0 || self.lines_per_plot.0 > self.lines_per_plot.1 {
            return bad("lines per plot range is empty");
        }
        let ordered = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi;
        if !ordered(self.line_spacing_m) || !ordered(self.line_length_m) {
            return bad("geometry ranges must be positive and ordered");
        }
        Ok(())
    }
}

/// Layout, fleet and terminals of a freshly generated farm.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedScenario {
    pub spec: ScenarioSpec,
    pub layout: FieldLayout,
    pub vehicles: Vec<VehicleParams<f64>>,
    pub sites: GraphSites,
}

impl GeneratedScenario {
    pub fn instance<T: Scalar>(&self) -> Result<Instance<T>> {
        let vehicles = self
            .vehicles
            .iter()
            .map(|v| VehicleParams::from_array(v.to_array().map(T::of)))
            .collect();
        Instance::new(self.layout.clone().into(), self.sites.clone(), vehicles)
    }
}

struct RawPlot {
    corners: [Point; 4],
    lines: Vec<[Point; 2]>,
    angle: f64,
}

fn raw_plot(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> RawPlot {
    let n = rng.gen_range(spec.lines_per_plot.0..=spec.lines_per_plot.1);
    let spacing = rng.gen_range(spec.line_spacing_m.0..=spec.line_spacing_m.1);
    let height = rng.gen_range(spec.line_length_m.0..=spec.line_length_m.1);
    let left = height * (1.0 + rng.gen_range(-0.15..=0.15));
    let right = height * (1.0 + rng.gen_range(-0.15..=0.15));
    let slope = rng.gen_range(-0.08..=0.08);
    let rotation = rng.gen_range(-PI / 12.0..=PI / 12.0);
    let width = n as f64 * spacing;
    let local = [
        Point::new(0.0, 0.0),
        Point::new(width, slope * width),
        Point::new(width, right),
        Point::new(0.0, left),
    ];
    let lines = (0..n)
        .map(|i| {
            let x = spacing / 2.0 + i as f64 * spacing;
            let top = left + (right - left) * x / width;
            [Point::new(x, slope * x).rotate(rotation), Point::new(x, top).rotate(rotation)]
        })
        .collect();
    RawPlot {
        corners: local.map(|p| p.rotate(rotation)),
        lines,
        angle: PI / 2.0 + rotation,
    }
}

struct LayoutBuilder {
    vertices: Vec<Point>,
    roads: Vec<RoadEdge>,
}

impl LayoutBuilder {
    fn vertex(&mut self, p: Point) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn road(&mut self, a: usize, b: usize) {
        let length_m = quantize(self.vertices[a].distance(self.vertices[b]));
        self.roads.push(RoadEdge { a, b, length_m });
    }
}

/// Generates a farm layout and fleet.
///
/// Plots are jittered quadrilaterals whose parallel working lines run
/// between two headland roads; plots sit in a grid of cells separated by
/// road corridors, each plot corner joins the nearest corridor junction,
/// and the depot hangs off a bottom-row junction.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<GeneratedScenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<RawPlot> = (0..spec.num_plots).map(|_| raw_plot(&mut rng, spec)).collect();
    let bounds: Vec<Bounds> = raw
        .iter()
        .map(|p| Bounds::of(p.corners).expect("four corners"))
        .collect();
    let cell_w = bounds.iter().map(Bounds::width).fold(0.0, f64::max) + CORRIDOR_M;
    let cell_h = bounds.iter().map(Bounds::height).fold(0.0, f64::max) + CORRIDOR_M;
    let cols = (spec.num_plots as f64).sqrt().ceil() as usize;
    let rows = spec.num_plots.div_ceil(cols);

    let mut b = LayoutBuilder {
        vertices: Vec::new(),
        roads: Vec::new(),
    };
    let junction = |c: usize, r: usize| r * (cols + 1) + c;
    for r in 0..=rows {
        for c in 0..=cols {
            b.vertex(Point::new(c as f64 * cell_w, r as f64 * cell_h));
        }
    }
    for r in 0..=rows {
        for c in 0..=cols {
            if c < cols {
                b.road(junction(c, r), junction(c + 1, r));
            }
            if r < rows {
                b.road(junction(c, r), junction(c, r + 1));
            }
        }
    }

    let mut plots = Vec::with_capacity(raw.len());
    let mut lines = Vec::new();
    for (p, (plot, bb)) in raw.iter().zip(&bounds).enumerate() {
        let (c, r) = (p % cols, p / cols);
        let slack_x = cell_w - CORRIDOR_M - bb.width();
        let slack_y = cell_h - CORRIDOR_M - bb.height();
        let jx = if slack_x > 0.0 { rng.gen_range(0.0..slack_x) } else { 0.0 };
        let jy = if slack_y > 0.0 { rng.gen_range(0.0..slack_y) } else { 0.0 };
        let dx = c as f64 * cell_w + CORRIDOR_M / 2.0 + jx - bb.min.x;
        let dy = r as f64 * cell_h + CORRIDOR_M / 2.0 + jy - bb.min.y;
        let corners = plot.corners.map(|q| q.offset(dx, dy));
        let corner_ids = corners.map(|q| b.vertex(q));
        let mut bottom = Vec::with_capacity(plot.lines.len());
        let mut top = Vec::with_capacity(plot.lines.len());
        let mut ids = Vec::with_capacity(plot.lines.len());
        for seg in &plot.lines {
            let endpoints = seg.map(|q| q.offset(dx, dy));
            let v0 = b.vertex(endpoints[0]);
            let v1 = b.vertex(endpoints[1]);
            bottom.push(v0);
            top.push(v1);
            ids.push(lines.len());
            lines.push(FieldLine {
                plot: p,
                endpoints,
                vertices: [v0, v1],
                length_m: quantize(endpoints[0].distance(endpoints[1])),
                angle: plot.angle,
            });
        }
        // headland ring: bottom edge, right side, top edge, left side
        let mut ring = vec![corner_ids[0]];
        ring.extend(&bottom);
        ring.push(corner_ids[1]);
        ring.push(corner_ids[2]);
        ring.extend(top.iter().rev());
        ring.push(corner_ids[3]);
        for w in ring.windows(2) {
            b.road(w[0], w[1]);
        }
        b.road(corner_ids[3], corner_ids[0]);
        let cell_corners = [junction(c, r), junction(c + 1, r), junction(c + 1, r + 1), junction(c, r + 1)];
        for (&id, &q) in corner_ids.iter().zip(&corners) {
            let nearest = cell_corners
                .iter()
                .copied()
                .min_by(|&a, &z| q.distance(b.vertices[a]).total_cmp(&q.distance(b.vertices[z])))
                .expect("four cell corners");
            b.road(id, nearest);
        }
        plots.push(Plot { corners, lines: ids });
    }

    let anchor = junction(rng.gen_range(0..=cols), 0);
    let drop = rng.gen_range(10.0..=25.0);
    let depot_point = b.vertices[anchor].offset(0.0, -drop);
    let depot = b.vertex(depot_point);
    b.road(anchor, depot);

    let vehicles: Vec<_> = (0..spec.num_vehicles).map(|_| sample_vehicle(&mut rng, &spec.vehicles)).collect();

    let layout = FieldLayout {
        plots,
        lines,
        vertices: b.vertices,
        roads: b.roads,
        depot,
    };
    let mut sites = GraphSites::full(&layout, spec.num_vehicles, spec.mode);
    if spec.mode == TerminalMode::PerVehicleTerminals && spec.terminals == TerminalPlacement::RandomJunctions {
        let junctions = (rows + 1) * (cols + 1);
        sites.starts = (0..spec.num_vehicles)
            .map(|_| Site::vertex(rng.gen_range(0..junctions)))
            .collect();
    }
    layout.validate()?;
    Ok(GeneratedScenario {
        spec: spec.clone(),
        layout,
        vehicles,
        sites,
    })
}
