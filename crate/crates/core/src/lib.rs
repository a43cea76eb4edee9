//! Entrance dependent vehicle routing (EDVRP) for farm fleets.
//!
//! Working lines have two entrances; a vehicle enters through one and
//! leaves through the other, so route cost depends on entrance choice as
//! well as order. This crate covers scenario generation, exact objective
//! evaluation, a masked sequential decision environment with a line
//! protocol server, baseline and exact solvers, and dynamic re-planning.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod model;
pub mod num;
pub mod objectives;
pub mod render;
pub mod dynamic;
pub mod env;
pub mod scenario;
pub mod solvers;

pub use error::{Error, Result};
pub use num::Scalar;

pub type TaskGraphF64 = model::TaskGraph<f64>;
pub type TaskGraphF32 = model::TaskGraph<f32>;
pub type ScenarioF64 = model::Scenario<f64>;
pub type ScenarioF32 = model::Scenario<f32>;
pub type VehicleParamsF64 = model::VehicleParams<f64>;
pub type VehicleParamsF32 = model::VehicleParams<f32>;
pub type ObjectiveVectorF64 = objectives::ObjectiveVector<f64>;
pub type ObjectiveVectorF32 = objectives::ObjectiveVector<f32>;
pub type EnvF64 = env::Env<f64>;
pub type EnvF32 = env::Env<f32>;
pub type InstanceF64 = scenario::Instance<f64>;
pub type InstanceF32 = scenario::Instance<f32>;
