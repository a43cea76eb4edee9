//! Deterministic SVG drawings of field layouts and vehicle trajectories.
//!
//! Coordinates are metres with the y axis flipped, so polyline lengths in
//! drawing units equal travelled metres. Numbers are printed with three
//! decimals; identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::dynamic::{Position, Snapshot};
use crate::error::{Error, Result};
use crate::model::{split_into_routes, Action, Plan, Violation};
use crate::scenario::geometry::Bounds;
use crate::scenario::{FieldLayout, GraphSites, Point, Router, Site};

/// Vehicle colors, indexed by vehicle id modulo the length.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const PHASE1_GRAY: &str = "#8c8c8c";

pub fn vehicle_color(vehicle: usize) -> &'static str {
    PALETTE[vehicle % PALETTE.len()]
}

/// A plan drawn over the nodes described by `sites`.
#[derive(Clone, Copy, Debug)]
pub struct PlanLayer<'a> {
    pub sites: &'a GraphSites,
    pub plan: &'a Plan,
    /// Color index per plan vehicle; defaults to the plan index.
    pub vehicle_ids: Option<&'a [usize]>,
}

impl<'a> PlanLayer<'a> {
    pub fn new(sites: &'a GraphSites, plan: &'a Plan) -> Self {
        Self { sites, plan, vehicle_ids: None }
    }

    fn vehicle_id(&self, k: usize) -> usize {
        self.vehicle_ids.and_then(|ids| ids.get(k).copied()).unwrap_or(k)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Scene<'a> {
    pub layout: &'a FieldLayout,
    /// Colored unless `snapshot` is set, in which case it is cut at the
    /// snapshot and drawn gray.
    pub plan: Option<PlanLayer<'a>>,
    pub snapshot: Option<&'a Snapshot>,
    /// Second-phase plan; its start sites get star markers.
    pub phase2: Option<PlanLayer<'a>>,
}

impl<'a> Scene<'a> {
    pub fn field(layout: &'a FieldLayout) -> Self {
        Self {
            layout,
            plan: None,
            snapshot: None,
            phase2: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Index within the plan.
    pub vehicle: usize,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

fn check_plan(sites: &GraphSites, plan: &Plan) -> Result<Vec<Vec<crate::model::LineVisit>>> {
    let unknown: Vec<Violation> = plan
        .actions
        .iter()
        .filter_map(|a| match a {
            Action::Visit(v) if v.line >= sites.lines.len() => Some(Violation::UnknownLine { line: v.line as i64 }),
            _ => None,
        })
        .collect();
    if !unknown.is_empty() {
        return Err(Error::InvalidPlan(unknown));
    }
    split_into_routes(plan, sites.num_vehicles)
}

struct Builder<'r, 'a> {
    router: &'r mut Router<'a>,
    layout: &'a FieldLayout,
    points: Vec<Point>,
    here: Site,
}

impl Builder<'_, '_> {
    fn push(&mut self, p: Point) {
        if self.points.last() != Some(&p) {
            self.points.push(p);
        }
    }

    fn travel(&mut self, to: Site) {
        let path = self.router.path(&self.here, &to);
        for p in path.points(self.layout) {
            self.push(p);
        }
        self.push(to.point(self.layout));
        self.here = to;
    }

    /// Straight run along a working line.
    fn work(&mut self, to: Site) {
        self.push(to.point(self.layout));
        self.here = to;
    }
}

/// Full trajectory of every vehicle of `plan`, terminal to terminal.
pub fn plan_trajectories(layout: &FieldLayout, sites: &GraphSites, plan: &Plan) -> Result<Vec<Trajectory>> {
    let routes = check_plan(sites, plan)?;
    let mut router = Router::new(layout);
    let mut out = Vec::with_capacity(routes.len());
    for (k, route) in routes.iter().enumerate() {
        let start = sites.start(k);
        let mut b = Builder {
            router: &mut router,
            layout,
            points: vec![start.point(layout)],
            here: start,
        };
        for v in route {
            b.travel(sites.entrance(v.line, v.entrance));
            b.work(sites.entrance(v.line, v.exit()));
        }
        b.travel(sites.end(k));
        out.push(Trajectory { vehicle: k, points: b.points });
    }
    Ok(out)
}

/// Trajectories of `plan` up to the snapshot positions.
pub fn partial_trajectories(layout: &FieldLayout, sites: &GraphSites, plan: &Plan, snapshot: &Snapshot) -> Result<Vec<Trajectory>> {
    let routes = check_plan(sites, plan)?;
    if snapshot.vehicles.len() != routes.len() {
        return Err(Error::Dynamic(format!(
            "snapshot has {} vehicles, plan has {}",
            snapshot.vehicles.len(),
            routes.len()
        )));
    }
    let mut router = Router::new(layout);
    let mut out = Vec::with_capacity(routes.len());
    for (k, (route, vs)) in routes.iter().zip(&snapshot.vehicles).enumerate() {
        let start = sites.start(k);
        let mut b = Builder {
            router: &mut router,
            layout,
            points: vec![start.point(layout)],
            here: start,
        };
        let done = vs.completed.len().min(route.len());
        for v in &route[..done] {
            b.travel(sites.entrance(v.line, v.entrance));
            b.work(sites.entrance(v.line, v.exit()));
        }
        match vs.position {
            Position::Transfer { site } | Position::Finished { site } => b.travel(site),
            Position::Working { line, entrance, site, .. } => {
                b.travel(sites.entrance(line, entrance));
                b.work(site);
            }
        }
        out.push(Trajectory { vehicle: k, points: b.points });
    }
    Ok(out)
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn xy(p: Point) -> String {
    format!("{},{}", num(p.x), num(-p.y))
}

fn points_attr(points: &[Point]) -> String {
    points.iter().map(|&p| xy(p)).collect::<Vec<_>>().join(" ")
}

fn star(center: Point, radius: f64) -> Vec<Point> {
    (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { radius } else { radius * 0.45 };
            let a = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        })
        .collect()
}

/// Renders `scene` as a standalone SVG document.
pub fn render_field(scene: &Scene) -> Result<String> {
    let layout = scene.layout;
    let phase1 = match (scene.plan, scene.snapshot) {
        (Some(layer), Some(snap)) => Some((layer, partial_trajectories(layout, layer.sites, layer.plan, snap)?, true)),
        (Some(layer), None) => Some((layer, plan_trajectories(layout, layer.sites, layer.plan)?, false)),
        _ => None,
    };
    let phase2 = match scene.phase2 {
        Some(layer) => Some((layer, plan_trajectories(layout, layer.sites, layer.plan)?)),
        None => None,
    };

    let corners = layout.plots.iter().flat_map(|p| p.corners);
    let ends = layout.lines.iter().flat_map(|l| l.endpoints);
    let bounds = Bounds::of(layout.vertices.iter().copied().chain(corners).chain(ends))
        .ok_or_else(|| Error::InvalidSpec("layout has no geometry".into()))?;
    let (w, h) = (bounds.width().max(1.0), bounds.height().max(1.0));
    let (mx, my) = (0.05 * w, 0.05 * h);
    let size = w.max(h);
    let stroke = size * 0.002;
    let marker = size * 0.006;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        num(bounds.min.x - mx),
        num(-bounds.max.y - my),
        num(w + 2.0 * mx),
        num(h + 2.0 * my)
    );
    let _ = writeln!(svg, r##"<rect class="background" x="{}" y="{}" width="{}" height="{}" fill="#ffffff"/>"##,
        num(bounds.min.x - mx), num(-bounds.max.y - my), num(w + 2.0 * mx), num(h + 2.0 * my));

    svg.push_str("<g id=\"plots\" fill=\"#edf4e4\" stroke=\"#9cb38a\"");
    let _ = writeln!(svg, " stroke-width=\"{}\">", num(stroke));
    for (i, plot) in layout.plots.iter().enumerate() {
        let _ = writeln!(svg, r#"<polygon class="plot" data-plot="{i}" points="{}"/>"#, points_attr(&plot.corners));
    }
    svg.push_str("</g>\n");

    let _ = writeln!(svg, "<g id=\"roads\" stroke=\"#555555\" stroke-width=\"{}\">", num(stroke * 1.5));
    for (i, r) in layout.roads.iter().enumerate() {
        let (a, b) = (layout.vertices[r.a], layout.vertices[r.b]);
        let _ = writeln!(svg, r#"<polyline class="road" data-road="{i}" fill="none" points="{} {}"/>"#, xy(a), xy(b));
    }
    svg.push_str("</g>\n");

    let _ = writeln!(
        svg,
        "<g id=\"working-lines\" stroke=\"#6b8e23\" stroke-width=\"{}\" stroke-dasharray=\"{} {}\">",
        num(stroke),
        num(stroke * 4.0),
        num(stroke * 3.0)
    );
    for (i, l) in layout.lines.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<polyline class="working-line" data-line="{i}" fill="none" points="{} {}"/>"#,
            xy(l.endpoints[0]),
            xy(l.endpoints[1])
        );
    }
    svg.push_str("</g>\n");

    svg.push_str("<g id=\"entrances\" fill=\"#333333\">\n");
    for (i, l) in layout.lines.iter().enumerate() {
        for (e, p) in l.endpoints.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<circle class="entrance" data-line="{i}" data-entrance="{e}" cx="{}" cy="{}" r="{}"/>"#,
                num(p.x),
                num(-p.y),
                num(marker * 0.5)
            );
        }
    }
    svg.push_str("</g>\n");

    if let Some((layer, trajectories, gray)) = &phase1 {
        let phase = if *gray { "phase1" } else { "plan" };
        let _ = writeln!(svg, "<g id=\"{phase}\" fill=\"none\" stroke-width=\"{}\">", num(stroke * 2.5));
        for t in trajectories {
            let id = layer.vehicle_id(t.vehicle);
            let color = if *gray { PHASE1_GRAY } else { vehicle_color(id) };
            let _ = writeln!(
                svg,
                r#"<polyline class="trajectory {phase}" data-vehicle="{id}" stroke="{color}" points="{}"/>"#,
                points_attr(&t.points)
            );
        }
        svg.push_str("</g>\n");
    }

    if let Some((layer, trajectories)) = &phase2 {
        let _ = writeln!(svg, "<g id=\"phase2\" fill=\"none\" stroke-width=\"{}\">", num(stroke * 2.5));
        for t in trajectories {
            let id = layer.vehicle_id(t.vehicle);
            let _ = writeln!(
                svg,
                r#"<polyline class="trajectory phase2" data-vehicle="{id}" stroke="{}" points="{}"/>"#,
                vehicle_color(id),
                points_attr(&t.points)
            );
        }
        svg.push_str("</g>\n");
        svg.push_str("<g id=\"phase2-starts\" stroke=\"#000000\"");
        let _ = writeln!(svg, " stroke-width=\"{}\">", num(stroke * 0.5));
        for k in 0..layer.sites.num_vehicles {
            let id = layer.vehicle_id(k);
            let p = layer.sites.start(k).point(layout);
            let _ = writeln!(
                svg,
                r#"<polygon class="phase2-start" data-vehicle="{id}" fill="{}" points="{}"/>"#,
                vehicle_color(id),
                points_attr(&star(p, marker * 1.6))
            );
        }
        svg.push_str("</g>\n");
    }

    let d = layout.depot_position();
    let tri = [
        Point::new(d.x, d.y + marker * 1.5),
        Point::new(d.x - marker * 1.3, d.y - marker * 0.75),
        Point::new(d.x + marker * 1.3, d.y - marker * 0.75),
    ];
    let _ = writeln!(svg, r##"<polygon id="depot" class="depot" fill="#000000" points="{}"/>"##, points_attr(&tri));
    svg.push_str("</svg>\n");
    Ok(svg)
}
