//! Acceptance suite. Each test prints one PASS/FAIL line with the measured
//! values, then asserts.

mod common;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use edvrp::dynamic::{rearrange_field_increase, rearrange_vehicle_decrease, snapshot, MidLineRemoval};
use edvrp::env::{rollout, serve_tcp, Env, GreedyPolicy, Hub, UniformRandomPolicy};
use edvrp::model::{validate_plan, Action, Plan, Scenario, TerminalMode};
use edvrp::objectives::{evaluate_plan, FuelConvention, Objective, RewardConfig};
use edvrp::scenario::{generate_scenario, GraphSites, Instance, ScenarioSpec};
use edvrp::solvers::{enumerate_plans, solve_exact, solve_greedy, solve_oga, solve_random, GaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const OBJECTIVES: [Objective; 3] = [Objective::Distance, Objective::Time, Objective::Fuel];

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] {verdict} {criterion}: {detail}\n");
    // written past the test harness capture so it lands in the log
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// 240 instances, L in 1..=6, M in 1..=2, both terminal modes, some pinned,
/// some derived from generated field geometry.
fn oracle_instances() -> Vec<Arc<Scenario<f64>>> {
    (0..240u64)
        .map(|i| {
            let l = 1 + (i % 6) as usize;
            let m = 1 + ((i / 6) % 2) as usize;
            match i % 4 {
                0 => small_field(i, l.max(2), m),
                1 => random_scenario(i, l, m, TerminalMode::PerVehicleTerminals, m == 2 && i % 8 == 1),
                _ => random_scenario(i, l, m, TerminalMode::SingleDepot, m == 2 && i % 3 == 0),
            }
        })
        .collect()
}

#[test]
fn oracle_equivalence_and_exact_dominance() {
    let instances = oracle_instances();
    let conv = FuelConvention::RateTime;
    let mut plans_checked = 0u64;
    let mut mismatches = Vec::new();
    let mut dominance_failures = Vec::new();
    for (i, s) in instances.iter().enumerate() {
        let reference_plans = all_plans(s);
        let mut seen: HashSet<Plan> = HashSet::with_capacity(reference_plans.len());
        let mut best = [f64::INFINITY; 3];
        let count = enumerate_plans(&s.graph, &s.vehicles, conv, |actions, ov| {
            let plan = Plan::new(actions.to_vec());
            let evaluated = evaluate_plan(&s.graph, &s.vehicles, &plan, conv).expect("enumerated plan is valid");
            let reference = reference_objectives(s, &plan, conv);
            if evaluated != reference || *ov != reference {
                mismatches.push(format!("instance {i} plan {:?}", plan.to_pairs()));
            }
            for (b, o) in best.iter_mut().zip(OBJECTIVES) {
                *b = b.min(reference.get(o));
            }
            seen.insert(plan);
        })
        .unwrap();
        plans_checked += count;
        if count as usize != reference_plans.len() || seen.len() != reference_plans.len() {
            mismatches.push(format!("instance {i}: enumerated {count}, reference {}", reference_plans.len()));
        }
        if reference_plans.iter().any(|p| !seen.contains(p)) {
            mismatches.push(format!("instance {i}: enumeration misses a plan"));
        }
        for (o, &optimum) in OBJECTIVES.iter().zip(&best) {
            let (_, exact) = solve_exact(s, *o, conv).unwrap();
            if exact.get(*o) != optimum {
                dominance_failures.push(format!("instance {i} {o}: exact {} vs brute force {optimum}", exact.get(*o)));
            }
            let others = [
                ("ra", solve_random(&s.graph, i as u64)),
                ("greedy", solve_greedy(s, *o, conv).unwrap()),
                ("oga", solve_oga(s, *o, conv, &GaConfig { population_size: 24, ..GaConfig::generations(15, i as u64) }).unwrap().plan),
            ];
            for (name, plan) in others {
                let v = evaluate_plan(&s.graph, &s.vehicles, &plan, conv).unwrap().get(*o);
                if exact.get(*o) > v {
                    dominance_failures.push(format!("instance {i} {o}: exact {} > {name} {v}", exact.get(*o)));
                }
            }
        }
    }
    let pass = mismatches.is_empty() && dominance_failures.is_empty();
    report(
        "oracle equivalence (L<=6, M<=2)",
        pass,
        &format!(
            "{} instances, {plans_checked} plans bit-identical to reference: {}; exact <= ra/greedy/oga on 3 objectives: {}",
            instances.len(),
            mismatches.is_empty(),
            dominance_failures.is_empty()
        ),
    );
    assert!(mismatches.is_empty(), "{:?}", &mismatches[..mismatches.len().min(5)]);
    assert!(dominance_failures.is_empty(), "{:?}", &dominance_failures[..dominance_failures.len().min(5)]);
}

fn episode_scenarios() -> Vec<Arc<Scenario<f64>>> {
    let mut out: Vec<Arc<Scenario<f64>>> = (0..20).map(|i| Arc::new(sampled_instance(500 + i).scenario)).collect();
    for i in 0..30u64 {
        let mode = if i % 2 == 0 { TerminalMode::SingleDepot } else { TerminalMode::PerVehicleTerminals };
        out.push(random_scenario(900 + i, 3 + (i % 25) as usize, 1 + (i % 6) as usize, mode, i % 5 == 0));
    }
    out
}

#[test]
fn telescoping_identities() {
    let scenarios = episode_scenarios();
    let episodes = 10_000;
    let (mut worst_t, mut worst_c) = (0.0f64, 0.0f64);
    let mut distance_exact = true;
    for ep in 0..episodes {
        let s = &scenarios[ep % scenarios.len()];
        let mut env = Env::new(s.clone(), RewardConfig::new(OBJECTIVES[ep % 3]));
        let mut policy = UniformRandomPolicy::new(ep as u64);
        let r = rollout(&mut env, &mut policy).unwrap();
        let (sd, st, sc) = r.rewards.iter().fold((0.0, 0.0, 0.0), |(a, b, c), x| (a + x.distance, b + x.time, c + x.fuel));
        let o = &r.objectives;
        distance_exact &= sd == o.total_transfer_distance;
        worst_t = worst_t.max(rel(st, o.makespan));
        worst_c = worst_c.max(rel(sc, o.total_fuel));
    }
    let pass = distance_exact && worst_t <= 1e-9 && worst_c <= 1e-9;
    report(
        "telescoping identities",
        pass,
        &format!("{episodes} episodes; distance exact: {distance_exact}; max rel error time {worst_t:.3e}, fuel {worst_c:.3e} (limit 1e-9)"),
    );
    assert!(pass);
}

#[test]
fn mask_soundness_fuzz() {
    let scenarios = episode_scenarios();
    let episodes = 10_000;
    let mut invalid = 0;
    let mut wrong_length = 0;
    let mut accepted_masked = 0;
    let mut rejected_legal = 0;
    for ep in 0..episodes {
        let s = &scenarios[ep % scenarios.len()];
        let (l, m) = (s.graph.num_lines(), s.graph.num_vehicles());
        let mut rng = ChaCha8Rng::seed_from_u64(ep as u64);
        let mut env = Env::new(s.clone(), RewardConfig::default());
        let mut mask = env.mask();
        let mut steps = 0;
        while !env.is_done() {
            // one masked probe per step must bounce and leave the state alone
            let illegal: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
            if !illegal.is_empty() {
                let before = env.state().actions().len();
                let probe = illegal[rng.gen_range(0..illegal.len())];
                if env.step_index(probe).is_ok() || env.state().actions().len() != before {
                    accepted_masked += 1;
                }
            }
            let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            let pick = legal[rng.gen_range(0..legal.len())];
            match env.step_index(pick) {
                Ok(step) => mask = step.mask,
                Err(_) => {
                    rejected_legal += 1;
                    break;
                }
            }
            steps += 1;
        }
        if steps != l + m - 1 || env.episode_length() != l + m - 1 {
            wrong_length += 1;
        }
        if !validate_plan(&s.graph, &env.state().plan()).is_valid() {
            invalid += 1;
        }
    }
    let pass = invalid == 0 && wrong_length == 0 && accepted_masked == 0 && rejected_legal == 0;
    report(
        "mask soundness fuzz",
        pass,
        &format!(
            "{episodes} episodes; invalid plans {invalid}; length != L+M-1 {wrong_length}; masked actions accepted {accepted_masked}; legal actions rejected {rejected_legal}"
        ),
    );
    assert!(pass);
}

#[test]
fn oga_beats_random_arrangement() {
    let conv = FuelConvention::RateTime;
    let n = 100;
    let generations = 500;
    let mut ra_sum = [0.0; 3];
    let mut oga_sum = [0.0; 3];
    let mut slowest = Duration::ZERO;
    for i in 0..n {
        let seed = 10_000 + i as u64;
        let s = Arc::new(sampled_instance(seed).scenario);
        let ra = evaluate_plan(&s.graph, &s.vehicles, &solve_random(&s.graph, seed), conv).unwrap();
        for (j, o) in OBJECTIVES.iter().enumerate() {
            ra_sum[j] += ra.get(*o);
            let clock = Instant::now();
            let out = solve_oga(&s, *o, conv, &GaConfig::generations(generations, seed)).unwrap();
            slowest = slowest.max(clock.elapsed());
            oga_sum[j] += out.value;
        }
    }
    let gains: Vec<f64> = ra_sum.iter().zip(&oga_sum).map(|(r, g)| 1.0 - g / r).collect();
    let pass = gains.iter().all(|&g| g >= 0.30) && slowest <= Duration::from_secs(20);
    report(
        "OGA vs RA directional",
        pass,
        &format!(
            "{n} scenarios, {generations} generations; mean improvement distance {:.1}%, time {:.1}%, fuel {:.1}% (need >= 30%); slowest solve {:.2} s (limit 20 s)",
            100.0 * gains[0],
            100.0 * gains[1],
            100.0 * gains[2],
            slowest.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn split(seed: u64) -> (Instance<f64>, Vec<usize>) {
    let mut spec = ScenarioSpec::sampled(seed);
    spec.num_plots = spec.num_plots.max(2);
    spec.num_vehicles = spec.num_vehicles.max(2);
    let g = generate_scenario(&spec).unwrap();
    let keep = spec.num_plots / 2;
    let layout = Arc::new(g.layout);
    let sites = GraphSites::for_plots(&layout, &(0..keep).collect::<Vec<_>>(), spec.num_vehicles, TerminalMode::SingleDepot);
    (Instance::new(layout, sites, g.vehicles).unwrap(), (keep..spec.num_plots).collect())
}

#[test]
fn dynamic_conservation() {
    let conv = FuelConvention::RateTime;
    let mut work_exact = true;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for i in 0..50u64 {
        let (inst, added) = split(20_000 + i);
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let plan = solve_greedy(&Arc::new(inst.scenario.clone()), OBJECTIVES[i as usize % 3], conv).unwrap();
        let fraction = rng.gen_range(0.05..0.95);
        let snap = snapshot(&inst, &plan, fraction, conv).unwrap();
        let mut replan = |s: &Arc<Scenario<f64>>| -> edvrp::Result<Plan> { Ok(solve_random(&s.graph, i)) };
        let m = inst.scenario.graph.num_vehicles();
        let removed: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).take(m - 1).collect();
        let removed = if removed.is_empty() { vec![rng.gen_range(0..m)] } else { removed };

        let mut outcomes = vec![(rearrange_field_increase(&inst, snap.clone(), &added, &mut replan).unwrap(), added.clone())];
        for option in [MidLineRemoval::FinishLine, MidLineRemoval::Abort] {
            outcomes.push((rearrange_vehicle_decrease(&inst, snap.clone(), &removed, option, &mut replan).unwrap(), Vec::new()));
        }
        for (out, added) in outcomes {
            runs += 1;
            let layout = &inst.layout;
            let expected_work = inst.sites.lines.iter().map(|t| t.length_m).sum::<f64>()
                + added.iter().flat_map(|&p| &layout.plots[p].lines).map(|&l| layout.lines[l].length_m).sum::<f64>();
            work_exact &= out.totals.work == expected_work;

            let consumed = |f: fn(&edvrp::objectives::VehicleTotals<f64>) -> f64| out.snapshot.vehicles.iter().map(|v| f(&v.consumed)).sum::<f64>();
            let returned = |f: fn(&edvrp::objectives::VehicleTotals<f64>) -> f64| out.returns.iter().map(|r| f(&r.totals)).sum::<f64>();
            let p2 = &out.phase2_objectives;
            let distance = consumed(|v| v.distance) + p2.total_transfer_distance + returned(|v| v.distance);
            let fuel = consumed(|v| v.fuel) + p2.total_fuel + returned(|v| v.fuel);
            let tail = out.returns.iter().map(|r| r.totals.time).fold(p2.makespan, f64::max);
            let makespan = out.snapshot.time + tail;
            let per_vehicle_distance: f64 = out.totals.per_vehicle.iter().map(|v| v.distance).sum();
            for (a, b) in [
                (out.totals.distance, distance),
                (out.totals.fuel, fuel),
                (out.totals.makespan, makespan),
                (per_vehicle_distance, distance),
            ] {
                worst = worst.max(rel(a, b));
            }
        }
    }
    let pass = work_exact && worst <= 1e-9;
    report(
        "dynamic conservation",
        pass,
        &format!("50 scenarios, {runs} re-plans (field increase, vehicle decrease x2); worked length == sum of lines exactly: {work_exact}; max additivity rel error {worst:.3e} (limit 1e-9)"),
    );
    assert!(pass);
}

#[test]
fn env_server_throughput() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hub = Arc::new(Hub::new(128));
    std::thread::spawn(move || serve_tcp(listener, hub));

    let scenarios: Vec<Scenario<f64>> = (0..8).map(|i| sampled_instance(30_000 + i).scenario).collect();
    let episodes = 64;
    let window = Duration::from_secs(3);
    let start = Instant::now();
    let handles: Vec<_> = (0..episodes)
        .map(|i| {
            let file = scenarios[i % scenarios.len()].to_file();
            std::thread::spawn(move || -> (u64, u64) {
                let stream = TcpStream::connect(addr).unwrap();
                stream.set_nodelay(true).unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut writer = stream;
                let mut line = String::new();
                let mut call = |req: Value| -> Value {
                    writer.write_all((req.to_string() + "\n").as_bytes()).unwrap();
                    line.clear();
                    reader.read_line(&mut line).unwrap();
                    let reply: Value = serde_json::from_str(&line).unwrap();
                    assert_eq!(reply["ok"], true, "{reply}");
                    reply
                };
                let session = format!("s{i}");
                call(json!({"v": 1, "type": "load_scenario", "session": session, "scenario": file}));
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let (mut steps, mut done_episodes) = (0u64, 0u64);
                while start.elapsed() < window {
                    let r = call(json!({"type": "reset", "session": session, "episode": "e", "include_graph": false}));
                    let mut mask: Vec<bool> = serde_json::from_value(r["mask"].clone()).unwrap();
                    loop {
                        let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                        let pick = legal[rng.gen_range(0..legal.len())];
                        let r = call(json!({"type": "step", "session": session, "episode": "e", "action": pick}));
                        steps += 1;
                        if r["done"] == true {
                            break;
                        }
                        mask = serde_json::from_value(r["mask"].clone()).unwrap();
                    }
                    done_episodes += 1;
                }
                (steps, done_episodes)
            })
        })
        .collect();
    let (mut steps, mut finished) = (0, 0);
    for h in handles {
        let (s, e) = h.join().unwrap();
        steps += s;
        finished += e;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let rate = steps as f64 / elapsed;
    let pass = rate >= 5000.0;
    report(
        "env server throughput",
        pass,
        &format!("{episodes} parallel TCP episodes, {steps} steps, {finished} episodes in {elapsed:.2} s: {rate:.0} steps/s (need >= 5000)"),
    );
    assert!(pass);
}

#[test]
fn greedy_policy_drives_every_primary_path() {
    // the primary suite needs no trained policy: greedy goes through the
    // same env and rollout path a served policy would
    let s = Arc::new(sampled_instance(40_000).scenario);
    for o in OBJECTIVES {
        let mut env = Env::new(s.clone(), RewardConfig::new(o));
        let r = rollout(&mut env, &mut GreedyPolicy).unwrap();
        assert!(validate_plan(&s.graph, &r.plan).is_valid());
        assert!(r.plan.actions.iter().filter(|a| **a == Action::Separator).count() == s.graph.num_vehicles() - 1);
    }
}
