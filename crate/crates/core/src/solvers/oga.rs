use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Entrance, Plan, Scenario, TaskGraph};
use crate::num::Scalar;
use crate::objectives::{evaluate_unchecked, FuelConvention, Objective};
use crate::solvers::random::repair_pins;

/// Ordered genetic algorithm settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    /// Stop after this many generations.
    pub generations: Option<usize>,
    /// Stop once this much wall-clock time has passed.
    pub time_budget_s: Option<f64>,
    pub crossover_rate: f64,
    pub segment_reverse_rate: f64,
    pub swap_rate: f64,
    pub entrance_flip_rate: f64,
    pub separator_move_rate: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 128,
            generations: None,
            time_budget_s: Some(14.0),
            crossover_rate: 0.9,
            segment_reverse_rate: 0.4,
            swap_rate: 0.2,
            entrance_flip_rate: 0.3,
            separator_move_rate: 0.2,
            elitism: 2,
            tournament_size: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    /// Fixed generation count and no time limit: fully deterministic.
    pub fn generations(generations: usize, seed: u64) -> Self {
        Self {
            generations: Some(generations),
            time_budget_s: None,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("crossover_rate", self.crossover_rate),
            ("segment_reverse_rate", self.segment_reverse_rate),
            ("swap_rate", self.swap_rate),
            ("entrance_flip_rate", self.entrance_flip_rate),
            ("separator_move_rate", self.separator_move_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidSpec(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if self.population_size < 2 {
            return Err(Error::InvalidSpec("population must hold at least two individuals".into()));
        }
        if self.elitism >= self.population_size {
            return Err(Error::InvalidSpec("elitism must be smaller than the population".into()));
        }
        if self.tournament_size == 0 {
            return Err(Error::InvalidSpec("tournament size must be positive".into()));
        }
        if self.generations.is_none() && self.time_budget_s.is_none() {
            return Err(Error::InvalidSpec("set a generation count or a time budget".into()));
        }
        if matches!(self.time_budget_s, Some(t) if !(t >= 0.0)) {
            return Err(Error::InvalidSpec("time budget must be non-negative".into()));
        }
        Ok(())
    }
}

/// Token permutation (tokens `>= L` are separators) plus one entrance bit
/// per line.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Genome {
    order: Vec<usize>,
    entrances: Vec<bool>,
}

impl Genome {
    fn random<R: Rng>(l: usize, m: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..l + m - 1).collect();
        order.shuffle(rng);
        Self {
            order,
            entrances: (0..l).map(|_| rng.gen()).collect(),
        }
    }

    fn actions(&self, l: usize) -> Vec<Action> {
        self.order
            .iter()
            .map(|&t| {
                if t >= l {
                    Action::Separator
                } else {
                    Action::visit(t, if self.entrances[t] { Entrance::One } else { Entrance::Zero })
                }
            })
            .collect()
    }

    /// Rewrites the genome so its decoded plan honours pins.
    fn repair<T: Scalar>(&mut self, graph: &TaskGraph<T>) {
        if graph.pins().iter().all(Option::is_none) {
            return;
        }
        let l = graph.num_lines();
        let mut actions = self.actions(l);
        repair_pins(graph, &mut actions);
        let mut next_sep = l;
        self.order = actions
            .iter()
            .map(|a| match a {
                Action::Separator => {
                    next_sep += 1;
                    next_sep - 1
                }
                Action::Visit(v) => {
                    self.entrances[v.line] = v.entrance == Entrance::One;
                    v.line
                }
            })
            .collect();
    }
}

/// Order crossover: a slice of `a` in place, the rest in `b`'s order.
fn ox1<R: Rng>(a: &[usize], b: &[usize], rng: &mut R) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.to_vec();
    }
    let i = rng.gen_range(0..n);
    let j = rng.gen_range(0..n);
    let (lo, hi) = (i.min(j), i.max(j));
    let mut taken = vec![false; n];
    let mut child = vec![usize::MAX; n];
    for p in lo..=hi {
        child[p] = a[p];
        taken[a[p]] = true;
    }
    let mut fill = b.iter().copied().filter(|&t| !taken[t]);
    for slot in child.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = fill.next().expect("b is a permutation of a");
    }
    child
}

fn mutate<R: Rng>(g: &mut Genome, l: usize, config: &GaConfig, rng: &mut R) {
    let n = g.order.len();
    if n >= 2 && rng.gen_bool(config.segment_reverse_rate) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let (lo, hi) = (i.min(j), i.max(j));
        g.order[lo..=hi].reverse();
        // the reversed stretch is driven backwards
        for &t in &g.order[lo..=hi] {
            if t < l {
                g.entrances[t] = !g.entrances[t];
            }
        }
    }
    if n >= 2 && rng.gen_bool(config.swap_rate) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        g.order.swap(i, j);
    }
    if l > 0 && rng.gen_bool(config.entrance_flip_rate) {
        let t = rng.gen_range(0..l);
        g.entrances[t] = !g.entrances[t];
    }
    if n > l && rng.gen_bool(config.separator_move_rate) {
        let seps: Vec<usize> = (0..n).filter(|&p| g.order[p] >= l).collect();
        let from = seps[rng.gen_range(0..seps.len())];
        let token = g.order.remove(from);
        let to = rng.gen_range(0..n);
        g.order.insert(to, token);
    }
}

/// Result of a GA run.
#[derive(Clone, Debug, PartialEq)]
pub struct GaOutcome {
    pub plan: Plan,
    pub value: f64,
    /// Best value after initialisation and after each generation.
    pub history: Vec<f64>,
    pub generations: usize,
    pub elapsed: Duration,
}

fn fitness<T: Scalar>(scenario: &Scenario<T>, g: &Genome, objective: Objective, convention: FuelConvention) -> f64 {
    let actions = g.actions(scenario.graph.num_lines());
    evaluate_unchecked(&scenario.graph, &scenario.vehicles, &actions, convention)
        .get(objective)
        .as_f64()
}

fn evaluate_all<T: Scalar>(scenario: &Scenario<T>, pop: &[Genome], objective: Objective, convention: FuelConvention) -> Vec<f64> {
    pop.par_iter().map(|g| fitness(scenario, g, objective, convention)).collect()
}

/// Index of the best individual; ties go to the lower index.
fn best_index(fit: &[f64]) -> usize {
    (0..fit.len()).fold(0, |b, i| if fit[i] < fit[b] { i } else { b })
}

/// Minimises one objective with the ordered genetic algorithm.
pub fn solve_oga<T: Scalar>(
    scenario: &Scenario<T>,
    objective: Objective,
    convention: FuelConvention,
    config: &GaConfig,
) -> Result<GaOutcome> {
    config.validate()?;
    let clock = Instant::now();
    let graph = &scenario.graph;
    let l = graph.num_lines();
    let m = graph.num_vehicles();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop: Vec<Genome> = (0..config.population_size)
        .map(|_| {
            let mut g = Genome::random(l, m, &mut rng);
            g.repair(graph);
            g
        })
        .collect();
    let mut fit = evaluate_all(scenario, &pop, objective, convention);
    let mut history = vec![fit[best_index(&fit)]];
    let budget = config.time_budget_s.map(Duration::from_secs_f64);
    let mut generation = 0;
    loop {
        if config.generations.is_some_and(|g| generation >= g) || budget.is_some_and(|b| clock.elapsed() >= b) {
            break;
        }
        let mut ranked: Vec<usize> = (0..pop.len()).collect();
        ranked.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = ranked[..config.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = ranked[..config.elitism].iter().map(|&i| fit[i]).collect();
        let tournament = |rng: &mut ChaCha8Rng| {
            let mut best = rng.gen_range(0..pop.len());
            for _ in 1..config.tournament_size {
                let c = rng.gen_range(0..pop.len());
                if fit[c] < fit[best] || (fit[c] == fit[best] && c < best) {
                    best = c;
                }
            }
            best
        };
        let mut children = Vec::with_capacity(config.population_size - next.len());
        while next.len() + children.len() < config.population_size {
            let a = &pop[tournament(&mut rng)];
            let b = &pop[tournament(&mut rng)];
            let mut child = if rng.gen_bool(config.crossover_rate) {
                Genome {
                    order: ox1(&a.order, &b.order, &mut rng),
                    entrances: a
                        .entrances
                        .iter()
                        .zip(&b.entrances)
                        .map(|(&x, &y)| if rng.gen() { x } else { y })
                        .collect(),
                }
            } else {
                a.clone()
            };
            mutate(&mut child, l, config, &mut rng);
            child.repair(graph);
            children.push(child);
        }
        next_fit.extend(evaluate_all(scenario, &children, objective, convention));
        next.extend(children);
        pop = next;
        fit = next_fit;
        generation += 1;
        history.push(fit[best_index(&fit)]);
    }
    let best = best_index(&fit);
    Ok(GaOutcome {
        plan: Plan::new(pop[best].actions(l)),
        value: fit[best],
        history,
        generations: generation,
        elapsed: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_plan;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn ox1_yields_permutation(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a: Vec<usize> = (0..n).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            let mut c = ox1(&a, &b, &mut rng);
            c.sort_unstable();
            prop_assert_eq!(c, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn operators_keep_plans_valid(seed in any::<u64>(), l in 1usize..12, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (graph, _) = crate::objectives::tests::random_graph(&mut rng, l, m, crate::model::TerminalMode::SingleDepot);
            let config = GaConfig { segment_reverse_rate: 1.0, swap_rate: 1.0, entrance_flip_rate: 1.0, separator_move_rate: 1.0, ..GaConfig::default() };
            let mut g = Genome::random(l, m, &mut rng);
            for _ in 0..20 {
                let other = Genome::random(l, m, &mut rng);
                g = Genome { order: ox1(&g.order, &other.order, &mut rng), entrances: g.entrances.clone() };
                mutate(&mut g, l, &config, &mut rng);
                g.repair(&graph);
                prop_assert!(validate_plan(&graph, &Plan::new(g.actions(l))).is_valid());
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let c = GaConfig { swap_rate: 1.5, ..GaConfig::default() };
        assert!(c.validate().is_err());
        let c = GaConfig { population_size: 1, ..GaConfig::default() };
        assert!(c.validate().is_err());
    }
}
