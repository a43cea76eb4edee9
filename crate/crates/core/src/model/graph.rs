use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::plan::{Entrance, LineVisit};
use crate::num::Scalar;

/// How vehicle routes are anchored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalMode {
    /// `M` start nodes followed by the lines, then `M` end nodes.
    PerVehicleTerminals,
    /// One depot node (index 0) shared by every vehicle.
    SingleDepot,
}

impl std::str::FromStr for TerminalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-vehicle-terminals" | "per-vehicle" => Ok(Self::PerVehicleTerminals),
            "single-depot" | "depot" => Ok(Self::SingleDepot),
            other => Err(Error::Unknown {
                kind: "terminal mode",
                value: other.to_string(),
            }),
        }
    }
}

/// Node feature vector `[cos θ, sin θ, l]`.
///
/// The direction points from entrance 0 to entrance 1. Terminal nodes are
/// all zeros.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct WorkingLineNode<T> {
    pub direction_cos: T,
    pub direction_sin: T,
    pub length_m: T,
}

impl<T: Scalar> WorkingLineNode<T> {
    pub fn line(angle_rad: f64, length_m: T) -> Self {
        Self {
            direction_cos: T::of(angle_rad.cos()),
            direction_sin: T::of(angle_rad.sin()),
            length_m,
        }
    }

    pub fn terminal() -> Self {
        Self {
            direction_cos: T::zero(),
            direction_sin: T::zero(),
            length_m: T::zero(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.direction_cos == T::zero() && self.direction_sin == T::zero() && self.length_m == T::zero()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.direction_cos, self.direction_sin, self.length_m]
    }
}

/// Vehicle parameters `[v^w, v^f, c^w, c^f]` (m/s and L/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleParams<T> {
    pub work_speed: T,
    pub transfer_speed: T,
    pub work_fuel_rate: T,
    pub transfer_fuel_rate: T,
}

impl<T: Scalar> VehicleParams<T> {
    pub fn new(work_speed: T, transfer_speed: T, work_fuel_rate: T, transfer_fuel_rate: T) -> Self {
        Self {
            work_speed,
            transfer_speed,
            work_fuel_rate,
            transfer_fuel_rate,
        }
    }

    pub fn to_array(self) -> [T; 4] {
        [
            self.work_speed,
            self.transfer_speed,
            self.work_fuel_rate,
            self.transfer_fuel_rate,
        ]
    }

    pub fn from_array([vw, vf, cw, cf]: [T; 4]) -> Self {
        Self::new(vw, vf, cw, cf)
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidVehicle {
                index,
                reason: reason.to_string(),
            })
        };
        let all = self.to_array();
        if all.iter().any(|x| !x.is_finite()) {
            return fail("non-finite parameter");
        }
        if self.work_speed <= T::zero() {
            return fail("working speed must be positive");
        }
        if self.transfer_speed < self.work_speed {
            return fail("transfer speed below working speed");
        }
        if self.transfer_fuel_rate <= T::zero() {
            return fail("transfer fuel rate must be positive");
        }
        if self.work_fuel_rate < self.transfer_fuel_rate {
            return fail("working fuel rate below transfer fuel rate");
        }
        Ok(())
    }
}

/// Everything needed to assemble a [`TaskGraph`].
///
/// Terminal tables are indexed by terminal slot: `M` slots in
/// per-vehicle mode, one slot (the depot) in single-depot mode.
#[derive(Clone, Debug)]
pub struct TaskGraphParts<T> {
    pub mode: TerminalMode,
    pub num_vehicles: usize,
    pub lines: Vec<WorkingLineNode<T>>,
    /// Row-major `L × L`; entry `[i * L + j]` holds `[d00, d01, d10, d11]`.
    pub line_distances: Vec<[T; 4]>,
    /// Row-major `slots × L`: terminal start to entrance 0/1 of each line.
    pub start_distances: Vec<[T; 2]>,
    /// Row-major `slots × L`: entrance 0/1 of each line to the terminal end.
    pub end_distances: Vec<[T; 2]>,
    /// Start-to-end distance of a vehicle whose route is empty, per vehicle.
    pub direct_return: Vec<T>,
    /// Forced first visit per vehicle.
    pub pins: Vec<Option<LineVisit>>,
    /// Plot membership per line, when known.
    pub line_plots: Option<Vec<usize>>,
}

/// Task graph `G = <N, E>` with entrance-to-entrance shortest distances.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGraph<T> {
    mode: TerminalMode,
    num_vehicles: usize,
    lines: Vec<WorkingLineNode<T>>,
    line_distances: Vec<[T; 4]>,
    start_distances: Vec<[T; 2]>,
    end_distances: Vec<[T; 2]>,
    direct_return: Vec<T>,
    pins: Vec<Option<LineVisit>>,
    line_plots: Option<Vec<usize>>,
}

impl<T: Scalar> TaskGraph<T> {
    pub fn from_parts(parts: TaskGraphParts<T>) -> Result<Self> {
        let TaskGraphParts {
            mode,
            num_vehicles,
            lines,
            line_distances,
            start_distances,
            end_distances,
            direct_return,
            pins,
            line_plots,
        } = parts;
        let m = num_vehicles;
        let l = lines.len();
        let bad = |msg: String| Err(Error::MalformedGraph(msg));
        if m == 0 {
            return bad("graph needs at least one vehicle".into());
        }
        let slots = match mode {
            TerminalMode::PerVehicleTerminals => m,
            TerminalMode::SingleDepot => 1,
        };
        if line_distances.len() != l * l {
            return bad(format!("line distance table has {} entries, expected {}", line_distances.len(), l * l));
        }
        if start_distances.len() != slots * l || end_distances.len() != slots * l {
            return bad(format!("terminal distance tables must have {} entries", slots * l));
        }
        if direct_return.len() != m || pins.len() != m {
            return bad(format!("direct return and pin tables must have {m} entries"));
        }
        if let Some(plots) = &line_plots {
            if plots.len() != l {
                return bad(format!("plot labels cover {} lines, expected {l}", plots.len()));
            }
        }
        let tol = T::of(1e-9);
        for (i, node) in lines.iter().enumerate() {
            let norm = node.direction_cos * node.direction_cos + node.direction_sin * node.direction_sin;
            if (norm - T::one()).abs() > tol.max(T::epsilon() * T::of(8.0)) {
                return bad(format!("line {i} direction is not a unit vector"));
            }
            if !(node.length_m > T::zero()) || !node.length_m.is_finite() {
                return bad(format!("line {i} has non-positive length"));
            }
        }
        let check = |x: T, what: &dyn Fn() -> String| -> Result<()> {
            if x.is_finite() && x >= T::zero() {
                Ok(())
            } else {
                Err(Error::MalformedGraph(format!("{} is not a finite non-negative distance", what())))
            }
        };
        for i in 0..l {
            for j in 0..l {
                let d = line_distances[i * l + j];
                if i == j {
                    continue;
                }
                for (slot, &x) in d.iter().enumerate() {
                    check(x, &|| format!("d*({i},{j})[{slot}]"))?;
                }
                let back = line_distances[j * l + i];
                for a in 0..2 {
                    for b in 0..2 {
                        if d[2 * a + b] != back[2 * b + a] {
                            return bad(format!("asymmetric distance between lines {i} and {j}"));
                        }
                    }
                }
            }
        }
        for (idx, pair) in start_distances.iter().chain(end_distances.iter()).enumerate() {
            for &x in pair {
                check(x, &|| format!("terminal distance entry {idx}"))?;
            }
        }
        for (k, &x) in direct_return.iter().enumerate() {
            check(x, &|| format!("direct return of vehicle {k}"))?;
        }
        let mut pinned = vec![false; l];
        for (k, pin) in pins.iter().enumerate() {
            if let Some(p) = pin {
                if p.line >= l {
                    return bad(format!("vehicle {k} is pinned to unknown line {}", p.line));
                }
                if std::mem::replace(&mut pinned[p.line], true) {
                    return bad(format!("line {} is pinned to more than one vehicle", p.line));
                }
            }
        }
        Ok(Self {
            mode,
            num_vehicles,
            lines,
            line_distances,
            start_distances,
            end_distances,
            direct_return,
            pins,
            line_plots,
        })
    }

    pub fn into_parts(self) -> TaskGraphParts<T> {
        TaskGraphParts {
            mode: self.mode,
            num_vehicles: self.num_vehicles,
            lines: self.lines,
            line_distances: self.line_distances,
            start_distances: self.start_distances,
            end_distances: self.end_distances,
            direct_return: self.direct_return,
            pins: self.pins,
            line_plots: self.line_plots,
        }
    }

    pub fn mode(&self) -> TerminalMode {
        self.mode
    }

    pub fn num_vehicles(&self) -> usize {
        self.num_vehicles
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> &[WorkingLineNode<T>] {
        &self.lines
    }

    pub fn line_length(&self, line: usize) -> T {
        self.lines[line].length_m
    }

    pub fn pins(&self) -> &[Option<LineVisit>] {
        &self.pins
    }

    pub fn pin(&self, vehicle: usize) -> Option<LineVisit> {
        self.pins[vehicle]
    }

    /// Vehicle a line is pinned to, if any.
    pub fn pinned_vehicle(&self, line: usize) -> Option<usize> {
        self.pins
            .iter()
            .position(|p| p.is_some_and(|p| p.line == line))
    }

    pub fn line_plots(&self) -> Option<&[usize]> {
        self.line_plots.as_deref()
    }

    pub fn direct_return(&self, vehicle: usize) -> T {
        self.direct_return[vehicle]
    }

    fn slot(&self, vehicle: usize) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => vehicle,
            TerminalMode::SingleDepot => 0,
        }
    }

    /// `d*` from entrance `from_entrance` of line `from` to entrance
    /// `to_entrance` of line `to`.
    #[inline]
    pub fn line_to_line(&self, from: usize, from_entrance: Entrance, to: usize, to_entrance: Entrance) -> T {
        let l = self.lines.len();
        self.line_distances[from * l + to][2 * from_entrance.index() + to_entrance.index()]
    }

    /// Distance from vehicle `vehicle`'s start terminal to an entrance.
    #[inline]
    pub fn start_to_line(&self, vehicle: usize, to: usize, entrance: Entrance) -> T {
        let l = self.lines.len();
        self.start_distances[self.slot(vehicle) * l + to][entrance.index()]
    }

    /// Distance from an entrance to vehicle `vehicle`'s end terminal.
    #[inline]
    pub fn line_to_end(&self, from: usize, entrance: Entrance, vehicle: usize) -> T {
        let l = self.lines.len();
        self.end_distances[self.slot(vehicle) * l + from][entrance.index()]
    }

    // ---- node-indexed view used by files and the wire protocol ----

    pub fn num_nodes(&self) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => self.lines.len() + 2 * self.num_vehicles,
            TerminalMode::SingleDepot => self.lines.len() + 1,
        }
    }

    pub fn start_node(&self, vehicle: usize) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => vehicle,
            TerminalMode::SingleDepot => 0,
        }
    }

    pub fn end_node(&self, vehicle: usize) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => self.num_vehicles + self.lines.len() + vehicle,
            TerminalMode::SingleDepot => 0,
        }
    }

    pub fn line_node(&self, line: usize) -> usize {
        match self.mode {
            TerminalMode::PerVehicleTerminals => self.num_vehicles + line,
            TerminalMode::SingleDepot => 1 + line,
        }
    }

    /// Line index of a node, or `None` for terminals.
    pub fn node_line(&self, node: usize) -> Option<usize> {
        let first = self.line_node(0);
        (node >= first && node < first + self.lines.len()).then(|| node - first)
    }

    pub fn node_features(&self) -> Vec<WorkingLineNode<T>> {
        let terminal = WorkingLineNode::terminal();
        match self.mode {
            TerminalMode::PerVehicleTerminals => std::iter::repeat_n(terminal, self.num_vehicles)
                .chain(self.lines.iter().copied())
                .chain(std::iter::repeat_n(terminal, self.num_vehicles))
                .collect(),
            TerminalMode::SingleDepot => std::iter::once(terminal).chain(self.lines.iter().copied()).collect(),
        }
    }

    fn start_slots(&self, node: usize) -> Vec<usize> {
        match self.mode {
            TerminalMode::PerVehicleTerminals => (node < self.num_vehicles).then_some(node).into_iter().collect(),
            TerminalMode::SingleDepot => (node == 0).then_some(0).into_iter().collect(),
        }
    }

    fn end_slot(&self, node: usize) -> Option<usize> {
        match self.mode {
            TerminalMode::PerVehicleTerminals => {
                let first = self.num_vehicles + self.lines.len();
                (node >= first && node < first + self.num_vehicles).then(|| node - first)
            }
            TerminalMode::SingleDepot => (node == 0).then_some(0),
        }
    }

    /// Edge `d_ij = [d*00, d*01, d*10, d*11]` between two nodes.
    ///
    /// Terminal entrances are a single logical entrance, so the terminal's
    /// index is ignored and its value is duplicated across both slots.
    pub fn edge(&self, from: usize, to: usize) -> Option<[T; 4]> {
        if from == to {
            return None;
        }
        let l = self.lines.len();
        match (self.node_line(from), self.node_line(to)) {
            (Some(i), Some(j)) => Some(self.line_distances[i * l + j]),
            (None, Some(j)) => {
                let slot = *self.start_slots(from).first()?;
                let [a, b] = self.start_distances[slot * l + j];
                Some([a, b, a, b])
            }
            (Some(i), None) => {
                let slot = self.end_slot(to)?;
                let [a, b] = self.end_distances[slot * l + i];
                Some([a, a, b, b])
            }
            (None, None) => None,
        }
    }

    /// Dense `N × N` edge matrix; `None` where nodes are not connected.
    pub fn edge_matrix(&self) -> Vec<Vec<Option<[T; 4]>>> {
        let n = self.num_nodes();
        (0..n)
            .map(|i| (0..n).map(|j| self.edge(i, j)).collect())
            .collect()
    }

    /// Converts every stored quantity to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<TaskGraph<U>> {
        let c = |x: T| U::of(x.as_f64());
        TaskGraph::from_parts(TaskGraphParts {
            mode: self.mode,
            num_vehicles: self.num_vehicles,
            lines: self
                .lines
                .iter()
                .map(|n| WorkingLineNode {
                    direction_cos: c(n.direction_cos),
                    direction_sin: c(n.direction_sin),
                    length_m: c(n.length_m),
                })
                .collect(),
            line_distances: self.line_distances.iter().map(|d| d.map(c)).collect(),
            start_distances: self.start_distances.iter().map(|d| d.map(c)).collect(),
            end_distances: self.end_distances.iter().map(|d| d.map(c)).collect(),
            direct_return: self.direct_return.iter().map(|&x| c(x)).collect(),
            pins: self.pins.clone(),
            line_plots: self.line_plots.clone(),
        })
    }

    /// Returns a copy with every distance and length multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for node in &mut out.lines {
            node.length_m = node.length_m * factor;
        }
        for d in &mut out.line_distances {
            d.iter_mut().for_each(|x| *x = *x * factor);
        }
        for d in out.start_distances.iter_mut().chain(out.end_distances.iter_mut()) {
            d.iter_mut().for_each(|x| *x = *x * factor);
        }
        out.direct_return.iter_mut().for_each(|x| *x = *x * factor);
        out
    }
}
