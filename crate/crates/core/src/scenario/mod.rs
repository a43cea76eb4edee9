//! Random farm scenarios and task graph derivation.
//!
//! Generation draws from a ChaCha8 stream seeded with the spec's 64-bit
//! seed, in this order: per plot (line count, spacing, height, shape
//! jitter, rotation), per plot placement jitter, depot placement, vehicle
//! parameters, vehicle terminals. Same seed, same scenario, on any
//! platform.

mod derive;
mod generate;
pub mod geometry;
pub mod layout;

pub use derive::{derive_task_graph, derive_with_sites, GraphSites, Instance, LayoutFile, TaskLine, LAYOUT_VERSION};
pub use generate::{generate_scenario, sample_vehicle, GeneratedScenario, ScenarioSpec, TerminalPlacement, VehicleRanges};
pub use geometry::{quantize, quantize_down, Point, LENGTH_QUANTUM};
pub use layout::{Carrier, FieldLayout, FieldLine, Path, Piece, Plot, RoadEdge, RoadNetwork, Router, Site};
