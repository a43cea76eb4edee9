//! Field geometry and shortest paths over the road network.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::geometry::Point;

/// A quadrilateral plot holding parallel working lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    /// Counter-clockwise: bottom-left, bottom-right, top-right, top-left
    /// in the plot's own frame.
    pub corners: [Point; 4],
    pub lines: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldLine {
    pub plot: usize,
    /// Endpoint of entrance 0 and entrance 1.
    pub endpoints: [Point; 2],
    /// Road vertices at the two entrances.
    pub vertices: [usize; 2],
    pub length_m: f64,
    /// Heading from entrance 0 to entrance 1, radians from east.
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub a: usize,
    pub b: usize,
    pub length_m: f64,
}

/// Geometric ground truth of a farm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldLayout {
    pub plots: Vec<Plot>,
    pub lines: Vec<FieldLine>,
    pub vertices: Vec<Point>,
    pub roads: Vec<RoadEdge>,
    pub depot: usize,
}

impl FieldLayout {
    pub fn depot_position(&self) -> Point {
        self.vertices[self.depot]
    }

    /// Checks entrances are road vertices, lines in a plot are parallel and
    /// distinct, and the road graph is connected.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let bad = |m: String| Err(Error::MalformedGraph(m));
        if self.depot >= n {
            return bad("depot is not a road vertex".into());
        }
        for (i, r) in self.roads.iter().enumerate() {
            if r.a >= n || r.b >= n || !(r.length_m >= 0.0) {
                return bad(format!("road {i} is malformed"));
            }
        }
        for (i, line) in self.lines.iter().enumerate() {
            if line.vertices.iter().any(|&v| v >= n) {
                return bad(format!("entrance of line {i} is not a road vertex"));
            }
            if line.plot >= self.plots.len() || !self.plots[line.plot].lines.contains(&i) {
                return bad(format!("line {i} is not listed by its plot"));
            }
        }
        for (p, plot) in self.plots.iter().enumerate() {
            for w in plot.lines.windows(2) {
                let (a, b) = (&self.lines[w[0]], &self.lines[w[1]]);
                if (a.angle - b.angle).abs() > 1e-12 {
                    return bad(format!("lines {} and {} of plot {p} are not parallel", w[0], w[1]));
                }
            }
            let mut vertices: Vec<usize> = plot.lines.iter().flat_map(|&l| self.lines[l].vertices).collect();
            vertices.sort_unstable();
            if vertices.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("lines of plot {p} overlap"));
            }
        }
        let tree = RoadNetwork::new(self).shortest_from(self.depot);
        if let Some(v) = tree.dist.iter().position(|d| !d.is_finite()) {
            return Err(Error::Disconnected(format!("road vertex {v}")));
        }
        Ok(())
    }
}

/// A location on the farm.
///
/// Offsets along roads are measured from the edge's `a` vertex; offsets
/// along lines from entrance 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Site {
    Vertex { vertex: usize },
    Road { edge: usize, offset: f64 },
    Line { line: usize, offset: f64 },
}

impl Site {
    pub fn vertex(vertex: usize) -> Self {
        Site::Vertex { vertex }
    }

    pub fn point(&self, layout: &FieldLayout) -> Point {
        match *self {
            Site::Vertex { vertex } => layout.vertices[vertex],
            Site::Road { edge, offset } => {
                let r = &layout.roads[edge];
                let t = if r.length_m > 0.0 { offset / r.length_m } else { 0.0 };
                layout.vertices[r.a].lerp(layout.vertices[r.b], t)
            }
            Site::Line { line, offset } => {
                let l = &layout.lines[line];
                l.endpoints[0].lerp(l.endpoints[1], offset / l.length_m)
            }
        }
    }

    fn carrier(&self) -> Option<(Carrier, f64)> {
        match *self {
            Site::Vertex { .. } => None,
            Site::Road { edge, offset } => Some((Carrier::Road(edge), offset)),
            Site::Line { line, offset } => Some((Carrier::Line(line), offset)),
        }
    }

    /// Road vertices reachable from the site along its carrier, with the
    /// distance to each and the carrier offset of the vertex.
    fn anchors(&self, layout: &FieldLayout) -> Vec<(usize, f64, f64)> {
        match *self {
            Site::Vertex { vertex } => vec![(vertex, 0.0, 0.0)],
            Site::Road { edge, offset } => {
                let r = &layout.roads[edge];
                vec![(r.a, offset, 0.0), (r.b, r.length_m - offset, r.length_m)]
            }
            Site::Line { line, offset } => {
                let l = &layout.lines[line];
                vec![(l.vertices[0], offset, 0.0), (l.vertices[1], l.length_m - offset, l.length_m)]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carrier {
    Road(usize),
    Line(usize),
}

/// Stretch of a single road or line between two offsets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub carrier: Carrier,
    pub from: f64,
    pub to: f64,
}

impl Piece {
    pub fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Path {
    pub pieces: Vec<Piece>,
    pub length: f64,
}

impl Path {
    /// Site reached after travelling `distance` metres along the path.
    pub fn site_at(&self, layout: &FieldLayout, start: Site, distance: f64) -> Site {
        let mut travelled = 0.0;
        let mut site = start;
        for piece in &self.pieces {
            let len = piece.length();
            let dir = if piece.to >= piece.from { 1.0 } else { -1.0 };
            if distance < travelled + len {
                let offset = piece.from + dir * (distance - travelled);
                return normalize(layout, piece.carrier, offset);
            }
            travelled += len;
            site = normalize(layout, piece.carrier, piece.to);
        }
        site
    }

    /// Polyline through every piece boundary.
    pub fn points(&self, layout: &FieldLayout) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::with_capacity(self.pieces.len() + 1);
        for piece in &self.pieces {
            let a = normalize(layout, piece.carrier, piece.from).point(layout);
            let b = normalize(layout, piece.carrier, piece.to).point(layout);
            if out.last() != Some(&a) {
                out.push(a);
            }
            out.push(b);
        }
        out
    }
}

fn normalize(layout: &FieldLayout, carrier: Carrier, offset: f64) -> Site {
    match carrier {
        Carrier::Road(edge) => {
            let r = &layout.roads[edge];
            if offset <= 0.0 {
                Site::vertex(r.a)
            } else if offset >= r.length_m {
                Site::vertex(r.b)
            } else {
                Site::Road { edge, offset }
            }
        }
        Carrier::Line(line) => {
            let l = &layout.lines[line];
            if offset <= 0.0 {
                Site::vertex(l.vertices[0])
            } else if offset >= l.length_m {
                Site::vertex(l.vertices[1])
            } else {
                Site::Line { line, offset }
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path tree.
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    /// Predecessor vertex and the road used to reach each vertex.
    pub pred: Vec<Option<(usize, usize)>>,
}

/// Adjacency view of the road graph.
#[derive(Clone, Debug)]
pub struct RoadNetwork {
    adjacency: Vec<Vec<(usize, usize)>>,
    lengths: Vec<f64>,
}

impl RoadNetwork {
    pub fn new(layout: &FieldLayout) -> Self {
        let mut adjacency = vec![Vec::new(); layout.vertices.len()];
        for (i, r) in layout.roads.iter().enumerate() {
            adjacency[r.a].push((r.b, i));
            adjacency[r.b].push((r.a, i));
        }
        Self {
            adjacency,
            lengths: layout.roads.iter().map(|r| r.length_m).collect(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    /// Dijkstra from `source`; unreachable vertices get `f64::INFINITY`.
    pub fn shortest_from(&self, source: usize) -> ShortestPaths {
        let n = self.adjacency.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier { dist: 0.0, vertex: source });
        while let Some(Frontier { dist: d, vertex }) = heap.pop() {
            if d > dist[vertex] {
                continue;
            }
            for &(next, edge) in &self.adjacency[vertex] {
                let nd = d + self.lengths[edge];
                if nd < dist[next] {
                    dist[next] = nd;
                    pred[next] = Some((vertex, edge));
                    heap.push(Frontier { dist: nd, vertex: next });
                }
            }
        }
        ShortestPaths { source, dist, pred }
    }
}

type Anchor = (usize, f64, f64);

/// Site-to-site shortest distances and paths, caching one tree per anchor.
pub struct Router<'a> {
    layout: &'a FieldLayout,
    network: RoadNetwork,
    trees: HashMap<usize, ShortestPaths>,
}

impl<'a> Router<'a> {
    pub fn new(layout: &'a FieldLayout) -> Self {
        Self {
            layout,
            network: RoadNetwork::new(layout),
            trees: HashMap::new(),
        }
    }

    pub fn layout(&self) -> &'a FieldLayout {
        self.layout
    }

    fn tree(&mut self, source: usize) -> &ShortestPaths {
        let network = &self.network;
        self.trees.entry(source).or_insert_with(|| network.shortest_from(source))
    }

    /// Best (from-anchor, to-anchor) pair, or `None` when a direct run
    /// along a shared carrier is at least as short.
    fn best(&mut self, from: &Site, to: &Site) -> (f64, Option<(Anchor, Anchor)>) {
        let mut best = f64::INFINITY;
        let mut choice = None;
        if let (Some((ca, oa)), Some((cb, ob))) = (from.carrier(), to.carrier()) {
            if ca == cb {
                best = (oa - ob).abs();
            }
        }
        let layout = self.layout;
        let to_anchors = to.anchors(layout);
        for fa in from.anchors(layout) {
            let tree = self.tree(fa.0);
            for &ta in &to_anchors {
                let d = fa.1 + tree.dist[ta.0] + ta.1;
                if d < best {
                    best = d;
                    choice = Some((fa, ta));
                }
            }
        }
        (best, choice)
    }

    pub fn distance(&mut self, from: &Site, to: &Site) -> f64 {
        self.best(from, to).0
    }

    pub fn vertex_distance(&mut self, from: usize, to: usize) -> f64 {
        self.tree(from).dist[to]
    }

    pub fn path(&mut self, from: &Site, to: &Site) -> Path {
        let (length, choice) = self.best(from, to);
        let mut pieces = Vec::new();
        match choice {
            None => {
                if let (Some((carrier, a)), Some((_, b))) = (from.carrier(), to.carrier()) {
                    if a != b {
                        pieces.push(Piece { carrier, from: a, to: b });
                    }
                }
            }
            Some((fa, ta)) => {
                if let Some((carrier, offset)) = from.carrier() {
                    if fa.1 > 0.0 {
                        pieces.push(Piece { carrier, from: offset, to: fa.2 });
                    }
                }
                let tree = self.tree(fa.0);
                let mut roads = Vec::new();
                let mut v = ta.0;
                while let Some((prev, edge)) = tree.pred[v] {
                    roads.push((prev, v, edge));
                    v = prev;
                }
                for &(a, b, edge) in roads.iter().rev() {
                    let r = &self.layout.roads[edge];
                    let (f, t) = if r.a == a && r.b == b { (0.0, r.length_m) } else { (r.length_m, 0.0) };
                    pieces.push(Piece { carrier: Carrier::Road(edge), from: f, to: t });
                }
                if let Some((carrier, offset)) = to.carrier() {
                    if ta.1 > 0.0 {
                        pieces.push(Piece { carrier, from: ta.2, to: offset });
                    }
                }
            }
        }
        Path { pieces, length }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Square of side 10 with a diagonal of length 20 (never shortest) and
    /// one line joining vertex 0 and 2.
    pub(crate) fn square() -> FieldLayout {
        let vertices = vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(0.0, 10.0),
        ];
        let roads = vec![
            RoadEdge { a: 0, b: 1, length_m: 10.0 },
            RoadEdge { a: 1, b: 2, length_m: 10.0 },
            RoadEdge { a: 2, b: 3, length_m: 10.0 },
            RoadEdge { a: 3, b: 0, length_m: 10.0 },
            RoadEdge { a: 0, b: 2, length_m: 20.0 },
        ];
        let lines = vec![FieldLine {
            plot: 0,
            endpoints: [vertices[1], vertices[3]],
            vertices: [1, 3],
            length_m: 14.0,
            angle: 2.356,
        }];
        FieldLayout {
            plots: vec![Plot {
                corners: [vertices[0], vertices[1], vertices[2], vertices[3]],
                lines: vec![0],
            }],
            lines,
            vertices,
            roads,
            depot: 0,
        }
    }

    #[test]
    fn single_edge_distance() {
        let layout = square();
        let mut r = Router::new(&layout);
        assert_eq!(r.distance(&Site::vertex(0), &Site::vertex(1)), 10.0);
        assert_eq!(r.distance(&Site::vertex(0), &Site::vertex(2)), 20.0);
        assert_eq!(r.distance(&Site::vertex(1), &Site::vertex(3)), 20.0);
    }

    #[test]
    fn road_and_line_sites() {
        let layout = square();
        let mut r = Router::new(&layout);
        let mid = Site::Road { edge: 0, offset: 4.0 };
        assert_eq!(r.distance(&mid, &Site::vertex(1)), 6.0);
        assert_eq!(r.distance(&mid, &Site::vertex(3)), 14.0);
        assert_eq!(r.distance(&mid, &Site::Road { edge: 0, offset: 9.0 }), 5.0);
        // line interiors are reached along the line from either entrance,
        // but the line is never a shortcut between other points
        let inside = Site::Line { line: 0, offset: 3.0 };
        assert_eq!(r.distance(&Site::vertex(1), &inside), 3.0);
        assert_eq!(r.distance(&Site::vertex(0), &inside), 13.0);
        let path = r.path(&mid, &Site::vertex(2));
        assert_eq!(path.length, 16.0);
        assert_eq!(path.pieces.iter().map(Piece::length).sum::<f64>(), 16.0);
        assert_eq!(path.site_at(&layout, mid, 6.0), Site::vertex(1));
        assert_eq!(path.site_at(&layout, mid, 8.0), Site::Road { edge: 1, offset: 2.0 });
        assert_eq!(path.site_at(&layout, mid, 99.0), Site::vertex(2));
    }

    #[test]
    fn validate_detects_disconnection() {
        let mut layout = square();
        layout.vertices.push(Point::new(50.0, 50.0));
        assert!(matches!(layout.validate(), Err(Error::Disconnected(_))));
    }
}
