//! Task graphs, vehicles and plans.

mod graph;
mod io;
mod plan;

pub use graph::{TaskGraph, TaskGraphParts, TerminalMode, VehicleParams, WorkingLineNode};
pub use io::{PlanFile, Scenario, ScenarioFile, SCENARIO_VERSION};
pub use plan::{
    join_routes, split_into_routes, validate_plan, Action, Entrance, LineVisit, Plan, Route,
    ValidationReport, Violation,
};
