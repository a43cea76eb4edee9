//! Plan construction: random arrangement, genetic search, exhaustive
//! search, a greedy heuristic and externally served policies.

mod exact;
mod oga;
mod random;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::env::{rollout, Env, GreedyPolicy, Policy};
use crate::error::{Error, Result};
use crate::model::{Plan, Scenario};
use crate::num::Scalar;
use crate::objectives::{evaluate_plan, FuelConvention, Objective, ObjectiveVector, RewardConfig};

pub use exact::{enumerate_plans, solve_exact, EXACT_MAX_LINES, EXACT_MAX_VEHICLES};
pub use oga::{solve_oga, GaConfig, GaOutcome};
pub use random::{random_channel_scales, random_plan, solve_random};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ra,
    Oga,
    Exact,
    Greedy,
    Policy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ra => "ra",
            Algorithm::Oga => "oga",
            Algorithm::Exact => "exact",
            Algorithm::Greedy => "greedy",
            Algorithm::Policy => "policy",
        }
    }

    /// Whether the result depends on the objective being optimised.
    pub fn uses_objective(self) -> bool {
        self != Algorithm::Ra
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ra" | "random" => Ok(Algorithm::Ra),
            "oga" | "ga" => Ok(Algorithm::Oga),
            "exact" => Ok(Algorithm::Exact),
            "greedy" => Ok(Algorithm::Greedy),
            "policy" => Ok(Algorithm::Policy),
            other => Err(Error::Unknown {
                kind: "algorithm",
                value: other.to_string(),
            }),
        }
    }
}

/// A plan with its objectives and the wall-clock time spent finding it.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub plan: Plan,
    pub objectives: ObjectiveVector<T>,
    pub runtime: Duration,
}

/// Greedy heuristic rollout for `objective`.
pub fn solve_greedy<T: Scalar>(scenario: &Arc<Scenario<T>>, objective: Objective, convention: FuelConvention) -> Result<Plan> {
    let mut config = RewardConfig::new(objective);
    config.fuel_convention = convention;
    let mut env = Env::new(scenario.clone(), config);
    Ok(rollout(&mut env, &mut GreedyPolicy)?.plan)
}

/// Rollout of an arbitrary policy for `objective`.
pub fn solve_with_policy<T: Scalar, P: Policy<T> + ?Sized>(
    scenario: &Arc<Scenario<T>>,
    objective: Objective,
    convention: FuelConvention,
    policy: &mut P,
) -> Result<Plan> {
    let mut config = RewardConfig::new(objective);
    config.fuel_convention = convention;
    let mut env = Env::new(scenario.clone(), config);
    Ok(rollout(&mut env, policy)?.plan)
}

/// Options shared by [`solve`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub objective: Objective,
    pub convention: FuelConvention,
    pub seed: u64,
    pub ga: GaConfig,
}

impl SolveOptions {
    pub fn new(objective: Objective, seed: u64) -> Self {
        Self {
            objective,
            convention: FuelConvention::RateTime,
            seed,
            ga: GaConfig {
                seed,
                ..GaConfig::default()
            },
        }
    }
}

/// Runs one built-in algorithm and times it. Use [`solve_with_policy`]
/// for served policies.
pub fn solve<T: Scalar>(scenario: &Arc<Scenario<T>>, algorithm: Algorithm, options: &SolveOptions) -> Result<Solution<T>> {
    let clock = Instant::now();
    let plan = match algorithm {
        Algorithm::Ra => solve_random(&scenario.graph, options.seed),
        Algorithm::Oga => solve_oga(scenario, options.objective, options.convention, &options.ga)?.plan,
        Algorithm::Exact => solve_exact(scenario, options.objective, options.convention)?.0,
        Algorithm::Greedy => solve_greedy(scenario, options.objective, options.convention)?,
        Algorithm::Policy => {
            return Err(Error::Policy("the policy algorithm needs a policy endpoint".into()));
        }
    };
    let runtime = clock.elapsed();
    let objectives = evaluate_plan(&scenario.graph, &scenario.vehicles, &plan, options.convention)?;
    Ok(Solution {
        plan,
        objectives,
        runtime,
    })
}
