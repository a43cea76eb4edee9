use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::Env;
use crate::error::{Error, Result};
use crate::model::{Action, Entrance, Plan};
use crate::num::Scalar;
use crate::objectives::{combine_reward, Objective, ObjectiveVector, StepRewards};

/// Chooses among unmasked actions.
pub trait Policy<T: Scalar> {
    fn select(&mut self, env: &Env<T>, mask: &[bool]) -> Result<Action>;
}

impl<T: Scalar, P: Policy<T> + ?Sized> Policy<T> for Box<P> {
    fn select(&mut self, env: &Env<T>, mask: &[bool]) -> Result<Action> {
        (**self).select(env, mask)
    }
}

/// Uniform choice over legal actions.
#[derive(Clone, Debug)]
pub struct UniformRandomPolicy {
    rng: ChaCha8Rng,
}

impl UniformRandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<T: Scalar> Policy<T> for UniformRandomPolicy {
    fn select(&mut self, env: &Env<T>, mask: &[bool]) -> Result<Action> {
        let legal = mask.iter().filter(|&&b| b).count();
        if legal == 0 {
            return Err(Error::Policy("no legal action".into()));
        }
        let pick = self.rng.gen_range(0..legal);
        let index = mask.iter().enumerate().filter(|(_, &b)| b).nth(pick).map(|(i, _)| i).unwrap();
        Ok(Action::from_index(index, env.graph().num_lines()).expect("mask has 2L + 1 entries"))
    }
}

/// Myopic heuristic: the visit with the lowest immediate combined cost,
/// ties broken by transfer distance then index.
///
/// Separators depend on the objective. Distance closes a route only when
/// nothing else is legal. Time hands every vehicle a share of the total
/// work proportional to its working speed. Fuel hands all work to the
/// vehicle with the cheapest metre.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyPolicy;

impl GreedyPolicy {
    fn wants_separator<T: Scalar>(env: &Env<T>) -> bool {
        let state = env.state();
        let vehicles = &env.scenario().vehicles;
        let k = state.current_vehicle();
        match env.config().objective {
            Objective::Distance => false,
            Objective::Time => {
                let graph = env.graph();
                let total: f64 = (0..graph.num_lines()).map(|i| graph.line_length(i).as_f64()).sum();
                let speed: f64 = vehicles.iter().map(|v| v.work_speed.as_f64()).sum();
                let quota = total * vehicles[k].work_speed.as_f64() / speed;
                state.totals()[k].work.as_f64() >= quota
            }
            Objective::Fuel => {
                let conv = env.config().fuel_convention;
                let cost = |i: usize| conv.fuel(&vehicles[i], T::one(), T::one()).as_f64();
                let best = (0..vehicles.len())
                    .min_by(|&a, &b| cost(a).total_cmp(&cost(b)))
                    .unwrap_or(0);
                k != best
            }
        }
    }
}

impl<T: Scalar> Policy<T> for GreedyPolicy {
    fn select(&mut self, env: &Env<T>, mask: &[bool]) -> Result<Action> {
        let l = env.graph().num_lines();
        let separator_legal = mask[2 * l];
        if separator_legal && Self::wants_separator(env) {
            return Ok(Action::Separator);
        }
        let mut best: Option<(f64, f64, usize)> = None;
        for (index, _) in mask[..2 * l].iter().enumerate().filter(|(_, &b)| b) {
            let action = Action::visit(index / 2, Entrance::from_index(index % 2).unwrap());
            let r: StepRewards<T> = env.preview(action)?;
            let key = (combine_reward(&r, env.config(), env.global_step()).as_f64(), r.distance.as_f64(), index);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        match best {
            Some((_, _, index)) => Ok(Action::from_index(index, l).unwrap()),
            None if separator_legal => Ok(Action::Separator),
            None => Err(Error::Policy("no legal action".into())),
        }
    }
}

/// A finished episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout<T> {
    pub plan: Plan,
    pub objectives: ObjectiveVector<T>,
    pub rewards: Vec<StepRewards<T>>,
    pub combined: Vec<T>,
}

/// Resets `env` and plays one episode with `policy`.
pub fn rollout<T: Scalar, P: Policy<T> + ?Sized>(env: &mut Env<T>, policy: &mut P) -> Result<Rollout<T>> {
    let mut mask = env.reset();
    let mut rewards = Vec::with_capacity(env.episode_length());
    let mut combined = Vec::with_capacity(env.episode_length());
    let l = env.graph().num_lines();
    while !env.is_done() {
        let action = policy.select(env, &mask)?;
        let index = action.to_index(l);
        if !mask.get(index).copied().unwrap_or(false) {
            return Err(Error::Policy(format!(
                "policy chose masked action {action} at step {}",
                env.state().actions().len()
            )));
        }
        let step = env.step(action)?;
        rewards.push(step.rewards);
        combined.push(step.combined);
        mask = step.mask;
    }
    Ok(Rollout {
        plan: env.state().plan(),
        objectives: env.objectives()?,
        rewards,
        combined,
    })
}
