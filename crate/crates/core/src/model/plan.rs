use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TaskGraph;
use crate::num::Scalar;

/// One of the two endpoints of a working line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Entrance {
    Zero,
    One,
}

impl Entrance {
    pub const BOTH: [Entrance; 2] = [Entrance::Zero, Entrance::One];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// The entrance a vehicle leaves by after entering here.
    #[inline]
    pub fn opposite(self) -> Self {
        match self {
            Entrance::Zero => Entrance::One,
            Entrance::One => Entrance::Zero,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Entrance::Zero),
            1 => Some(Entrance::One),
            _ => None,
        }
    }
}

impl From<Entrance> for u8 {
    fn from(e: Entrance) -> u8 {
        e as u8
    }
}

impl TryFrom<u8> for Entrance {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Entrance::from_index(v as usize).ok_or_else(|| format!("entrance {v} out of range"))
    }
}

/// A working line entered through a given entrance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineVisit {
    pub line: usize,
    pub entrance: Entrance,
}

impl LineVisit {
    pub fn new(line: usize, entrance: Entrance) -> Self {
        Self { line, entrance }
    }

    #[inline]
    pub fn exit(self) -> Entrance {
        self.entrance.opposite()
    }
}

/// One decision of the sequence `P_A`.
///
/// `Separator` is the depot/terminal selection that closes the current
/// vehicle's route. It orders before every visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Separator,
    Visit(LineVisit),
}

impl Action {
    pub fn visit(line: usize, entrance: Entrance) -> Self {
        Action::Visit(LineVisit::new(line, entrance))
    }

    /// Flattened index in the `2L + 1` action space.
    pub fn to_index(self, num_lines: usize) -> usize {
        match self {
            Action::Visit(v) => 2 * v.line + v.entrance.index(),
            Action::Separator => 2 * num_lines,
        }
    }

    pub fn from_index(index: usize, num_lines: usize) -> Option<Self> {
        if index == 2 * num_lines {
            Some(Action::Separator)
        } else if index < 2 * num_lines {
            Some(Action::visit(index / 2, Entrance::from_index(index % 2)?))
        } else {
            None
        }
    }

    /// `(node, entrance)` pair as written in files; the separator is `(-1, 0)`.
    pub fn to_pair(self) -> (i64, i64) {
        match self {
            Action::Separator => (-1, 0),
            Action::Visit(v) => (v.line as i64, v.entrance.index() as i64),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Separator => write!(f, "separator"),
            Action::Visit(v) => write!(f, "({}, {})", v.line, v.entrance.index()),
        }
    }
}

pub type Route = Vec<LineVisit>;

/// Global sequence of actions, split into vehicle routes by separators.
/// Serialized as a list of `[node, entrance]` pairs, separators as `[-1, 0]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<(i64, i64)>", try_from = "Vec<(i64, i64)>")]
pub struct Plan {
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn separator_count(&self) -> usize {
        self.actions.iter().filter(|a| **a == Action::Separator).count()
    }

    pub fn to_pairs(&self) -> Vec<(i64, i64)> {
        self.actions.iter().map(|a| a.to_pair()).collect()
    }

    /// Parses `(node, entrance)` pairs, rejecting out-of-range values.
    pub fn from_pairs(pairs: &[(i64, i64)]) -> Result<Self> {
        let mut violations = Vec::new();
        let mut actions = Vec::with_capacity(pairs.len());
        for (position, &(node, entrance)) in pairs.iter().enumerate() {
            if node == -1 {
                actions.push(Action::Separator);
                continue;
            }
            if node < 0 {
                violations.push(Violation::UnknownLine { line: node });
                continue;
            }
            match Entrance::from_index(entrance as usize).filter(|_| entrance >= 0) {
                Some(e) => actions.push(Action::visit(node as usize, e)),
                None => violations.push(Violation::EntranceOutOfRange { position, value: entrance }),
            }
        }
        if violations.is_empty() {
            Ok(Self { actions })
        } else {
            Err(Error::InvalidPlan(violations))
        }
    }
}

impl From<Plan> for Vec<(i64, i64)> {
    fn from(plan: Plan) -> Self {
        plan.to_pairs()
    }
}

impl TryFrom<Vec<(i64, i64)>> for Plan {
    type Error = Error;

    fn try_from(pairs: Vec<(i64, i64)>) -> Result<Self> {
        Plan::from_pairs(&pairs)
    }
}

/// A single reason a plan is not well-formed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateLine { line: usize },
    MissingLine { line: usize },
    UnknownLine { line: i64 },
    EntranceOutOfRange { position: usize, value: i64 },
    SeparatorOverflow { count: usize, max: usize },
    SeparatorUnderflow { count: usize, expected: usize },
    PinViolated { vehicle: usize, line: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateLine { line } => write!(f, "duplicate node {line}"),
            Violation::MissingLine { line } => write!(f, "missing node {line}"),
            Violation::UnknownLine { line } => write!(f, "unknown node {line}"),
            Violation::EntranceOutOfRange { position, value } => {
                write!(f, "entrance {value} out of range at position {position}")
            }
            Violation::SeparatorOverflow { count, max } => {
                write!(f, "separator overflow: {count} separators, at most {max}")
            }
            Violation::SeparatorUnderflow { count, expected } => {
                write!(f, "separator underflow: {count} separators, expected {expected}")
            }
            Violation::PinViolated { vehicle, line } => {
                write!(f, "vehicle {vehicle} must start with its pinned line {line}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidPlan(self.violations))
        }
    }
}

/// Checks that `plan` visits every line exactly once with exactly `M - 1`
/// separators and honours pinned first visits.
pub fn validate_plan<T: Scalar>(graph: &TaskGraph<T>, plan: &Plan) -> ValidationReport {
    let l = graph.num_lines();
    let m = graph.num_vehicles();
    let mut seen = vec![false; l];
    let mut violations = Vec::new();
    let mut separators = 0;
    for action in &plan.actions {
        match *action {
            Action::Separator => separators += 1,
            Action::Visit(v) if v.line >= l => violations.push(Violation::UnknownLine { line: v.line as i64 }),
            Action::Visit(v) => {
                if std::mem::replace(&mut seen[v.line], true) {
                    violations.push(Violation::DuplicateLine { line: v.line });
                }
            }
        }
    }
    violations.extend(
        seen.iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(|(line, _)| Violation::MissingLine { line }),
    );
    let expected = m - 1;
    if separators > expected {
        violations.push(Violation::SeparatorOverflow { count: separators, max: expected });
    } else if separators < expected {
        violations.push(Violation::SeparatorUnderflow { count: separators, expected });
    } else {
        let mut vehicle = 0;
        let mut first = true;
        let check = |vehicle: usize, head: Option<LineVisit>, violations: &mut Vec<Violation>| {
            if let Some(pin) = graph.pin(vehicle) {
                if head != Some(pin) {
                    violations.push(Violation::PinViolated { vehicle, line: pin.line });
                }
            }
        };
        for action in &plan.actions {
            match *action {
                Action::Separator => {
                    if first {
                        check(vehicle, None, &mut violations);
                    }
                    vehicle += 1;
                    first = true;
                }
                Action::Visit(v) => {
                    if first {
                        check(vehicle, Some(v), &mut violations);
                        first = false;
                    }
                }
            }
        }
        if first {
            check(vehicle, None, &mut violations);
        }
    }
    ValidationReport { violations }
}

/// Splits a plan into `num_vehicles` routes; route `k` belongs to vehicle `k`.
pub fn split_into_routes(plan: &Plan, num_vehicles: usize) -> Result<Vec<Route>> {
    let count = plan.separator_count();
    let expected = num_vehicles.saturating_sub(1);
    if num_vehicles == 0 || count != expected {
        let violation = if count > expected {
            Violation::SeparatorOverflow { count, max: expected }
        } else {
            Violation::SeparatorUnderflow { count, expected }
        };
        return Err(Error::InvalidPlan(vec![violation]));
    }
    let mut routes = vec![Vec::new(); num_vehicles];
    let mut k = 0;
    for action in &plan.actions {
        match *action {
            Action::Separator => k += 1,
            Action::Visit(v) => routes[k].push(v),
        }
    }
    Ok(routes)
}

/// Inverse of [`split_into_routes`].
pub fn join_routes(routes: &[Route]) -> Plan {
    let mut actions = Vec::new();
    for (k, route) in routes.iter().enumerate() {
        if k > 0 {
            actions.push(Action::Separator);
        }
        actions.extend(route.iter().copied().map(Action::Visit));
    }
    Plan { actions }
}
