//! Batch experiments: scenarios × algorithms × objectives × seeds.
//!
//! Rows come out in manifest order whatever order the worker threads
//! finish in, and each row is flushed as soon as every earlier row is.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::env::{LineClient, RemotePolicy};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::objectives::{evaluate_plan, FuelConvention, Objective};
use crate::solvers::{solve, solve_with_policy, Algorithm, GaConfig, SolveOptions};

pub const MANIFEST_VERSION: u32 = 1;

/// Objective label used for rows of objective-independent algorithms.
pub const ANY_OBJECTIVE: &str = "any";

fn default_objectives() -> Vec<Objective> {
    vec![Objective::Distance, Objective::Time, Objective::Fuel]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    /// Scenario files, relative to the manifest's base directory.
    pub scenarios: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_objectives")]
    pub objectives: Vec<Objective>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub fuel_convention: FuelConvention,
    /// Genetic search settings; the row seed replaces `ga.seed`.
    #[serde(default = "bench_ga")]
    pub ga: GaConfig,
    /// Address of an act-request server, required by `policy`.
    #[serde(default)]
    pub policy_endpoint: Option<String>,
    /// When false, `runtime_s` is written as 0 so reruns are byte-identical.
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

/// Generation-limited so runs are reproducible.
pub fn bench_ga() -> GaConfig {
    GaConfig::generations(500, 0)
}

impl Manifest {
    pub fn new(scenarios: Vec<PathBuf>, algorithms: Vec<Algorithm>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            scenarios,
            algorithms,
            objectives: default_objectives(),
            seeds: default_seeds(),
            fuel_convention: FuelConvention::default(),
            ga: bench_ga(),
            policy_endpoint: None,
            record_runtime: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: Self = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: MANIFEST_VERSION,
            });
        }
        if self.scenarios.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidSpec("manifest needs at least one scenario, algorithm and seed".into()));
        }
        if self.objectives.is_empty() && self.algorithms.iter().any(|a| a.uses_objective()) {
            return Err(Error::InvalidSpec("manifest lists no objectives".into()));
        }
        if self.algorithms.contains(&Algorithm::Policy) && self.policy_endpoint.is_none() {
            return Err(Error::InvalidSpec("the policy algorithm needs policy_endpoint".into()));
        }
        self.ga.validate()
    }

    /// Expands the manifest into jobs, in output order.
    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for scenario in 0..self.scenarios.len() {
            for &algorithm in &self.algorithms {
                let objectives: Vec<Option<Objective>> = if algorithm.uses_objective() {
                    self.objectives.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for objective in objectives {
                    for &seed in &self.seeds {
                        jobs.push(Job {
                            scenario,
                            algorithm,
                            objective,
                            seed,
                        });
                    }
                }
            }
        }
        jobs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Job {
    pub scenario: usize,
    pub algorithm: Algorithm,
    /// `None` for objective-independent algorithms.
    pub objective: Option<Objective>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario_id: String,
    pub algo: String,
    pub objective: String,
    pub distance_m: f64,
    pub time_s: f64,
    #[serde(rename = "fuel_L")]
    pub fuel_l: f64,
    pub runtime_s: f64,
    pub seed: u64,
    pub total_distance_m: f64,
}

/// Mean of each metric per (algorithm, objective).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub objective: String,
    pub count: usize,
    pub distance_m: f64,
    pub time_s: f64,
    #[serde(rename = "fuel_L")]
    pub fuel_l: f64,
    pub runtime_s: f64,
}

#[derive(Debug)]
pub struct JobFailure {
    pub job: Job,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub failures: Vec<JobFailure>,
}

impl BenchReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Scenario id: the file name without its `.json` extension.
pub fn scenario_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".json").map(str::to_string).unwrap_or(name)
}

fn objective_label(objective: Option<Objective>) -> String {
    match objective {
        Some(o) => o.to_string(),
        None => ANY_OBJECTIVE.to_string(),
    }
}

fn run_job(manifest: &Manifest, scenarios: &[(String, Arc<Scenario<f64>>)], job: Job) -> Result<Row> {
    let (id, scenario) = &scenarios[job.scenario];
    let objective = job.objective.unwrap_or(Objective::Distance);
    let mut options = SolveOptions::new(objective, job.seed);
    options.convention = manifest.fuel_convention;
    options.ga = GaConfig {
        seed: job.seed,
        ..manifest.ga.clone()
    };
    let (objectives, runtime) = if job.algorithm == Algorithm::Policy {
        let endpoint = manifest.policy_endpoint.as_deref().unwrap_or_default();
        let mut policy = RemotePolicy::new(LineClient::connect(endpoint)?, format!("bench-{}", job.seed));
        let clock = Instant::now();
        let plan = solve_with_policy(scenario, objective, options.convention, &mut policy)?;
        let runtime = clock.elapsed();
        (evaluate_plan(&scenario.graph, &scenario.vehicles, &plan, options.convention)?, runtime)
    } else {
        let s = solve(scenario, job.algorithm, &options)?;
        (s.objectives, s.runtime)
    };
    Ok(Row {
        scenario_id: id.clone(),
        algo: job.algorithm.to_string(),
        objective: objective_label(job.objective),
        distance_m: objectives.total_transfer_distance,
        time_s: objectives.makespan,
        fuel_l: objectives.total_fuel,
        runtime_s: if manifest.record_runtime { runtime.as_secs_f64() } else { 0.0 },
        seed: job.seed,
        total_distance_m: objectives.total_transfer_distance + objectives.total_work,
    })
}

/// Loads every scenario up front so a missing file aborts before any work.
pub fn load_scenarios(manifest: &Manifest, base: &Path) -> Result<Vec<(String, Arc<Scenario<f64>>)>> {
    manifest
        .scenarios
        .iter()
        .map(|p| {
            let path = base.join(p);
            let scenario = Scenario::load(&path)?;
            Ok((scenario_id(&path), Arc::new(scenario)))
        })
        .collect()
}

/// Runs the manifest on `jobs` worker threads, writing CSV rows to `out`
/// in manifest order.
pub fn run_benchmark<W: Write>(manifest: &Manifest, base: &Path, jobs: usize, out: W) -> Result<BenchReport> {
    manifest.validate()?;
    let scenarios = load_scenarios(manifest, base)?;
    let work = manifest.jobs();
    let mut writer = csv::Writer::from_writer(out);
    let mut report = BenchReport::default();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<Row>)>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..jobs.max(1).min(work.len().max(1)) {
            let tx = tx.clone();
            let (next, work, scenarios) = (&next, &work, &scenarios);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= work.len() {
                    break;
                }
                if tx.send((i, run_job(manifest, scenarios, work[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut flushed = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&flushed) {
                match result {
                    Ok(row) => {
                        writer.serialize(&row).map_err(csv_error)?;
                        writer.flush()?;
                        report.rows.push(row);
                    }
                    Err(error) => report.failures.push(JobFailure { job: work[flushed], error }),
                }
                flushed += 1;
            }
        }
        Ok(())
    })?;
    writer.flush()?;
    Ok(report)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidSpec(format!("csv: {other:?}")),
    }
}

/// Means per (algorithm, objective) in first-appearance order.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: BTreeMap<(String, String), (usize, [f64; 4])> = BTreeMap::new();
    for r in rows {
        let key = (r.algo.clone(), r.objective.clone());
        let entry = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, [0.0; 4])
        });
        entry.0 += 1;
        for (acc, v) in entry.1.iter_mut().zip([r.distance_m, r.time_s, r.fuel_l, r.runtime_s]) {
            *acc += v;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (n, s) = sums[&key];
            let mean = |v: f64| v / n as f64;
            SummaryRow {
                algo: key.0,
                objective: key.1,
                count: n,
                distance_m: mean(s[0]),
                time_s: mean(s[1]),
                fuel_l: mean(s[2]),
                runtime_s: mean(s[3]),
            }
        })
        .collect()
}

/// Fixed-width table with columns Distance, Time, Fuel, Runtime.
pub fn summary_table(summary: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<8} {:<9} {:>6} {:>14} {:>12} {:>12} {:>11}\n",
        "algo", "objective", "n", "Distance (m)", "Time (s)", "Fuel (L)", "Runtime (s)"
    );
    for r in summary {
        s.push_str(&format!(
            "{:<8} {:<9} {:>6} {:>14.2} {:>12.2} {:>12.3} {:>11.4}\n",
            r.algo, r.objective, r.count, r.distance_m, r.time_s, r.fuel_l, r.runtime_s
        ));
    }
    s
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in summary {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
