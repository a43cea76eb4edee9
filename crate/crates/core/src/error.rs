use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("malformed task graph: {0}")]
    MalformedGraph(String),

    #[error("invalid vehicle {index}: {reason}")]
    InvalidVehicle { index: usize, reason: String },

    #[error("invalid plan: {}", format_violations(.0))]
    InvalidPlan(Vec<Violation>),

    #[error("no edge from node {from} to node {to}")]
    MissingEdge { from: usize, to: usize },

    #[error("road network is disconnected: {0} is unreachable")]
    Disconnected(String),

    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: String, reason: String },

    #[error("episode already finished")]
    EpisodeDone,

    #[error("episode is not finished")]
    EpisodeNotDone,

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("instance too large for exhaustive search: {lines} lines and {vehicles} vehicles (limit {max_lines} lines, {max_vehicles} vehicles)")]
    TooLarge {
        lines: usize,
        vehicles: usize,
        max_lines: usize,
        max_vehicles: usize,
    },

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{0}")]
    Dynamic(String),

    #[error("policy failure: {0}")]
    Policy(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
