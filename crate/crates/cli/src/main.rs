use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use edvrp::bench::{run_benchmark, summarize, summary_table, write_summary_csv, Manifest};
use edvrp::dynamic::{
    rearrange_field_increase, rearrange_vehicle_decrease, snapshot, DynamicOutcome, DynamicRecord, MidLineRemoval,
};
use edvrp::env::{serve_stdio, serve_tcp, Hub, LineClient, RemotePolicy};
use edvrp::model::{PlanFile, Plan, Scenario, TerminalMode};
use edvrp::objectives::{evaluate_plan, FuelConvention, Objective, ObjectiveVector};
use edvrp::render::{render_field, PlanLayer, Scene};
use edvrp::scenario::{generate_scenario, GraphSites, Instance, LayoutFile, ScenarioSpec, TerminalPlacement};
use edvrp::solvers::{solve, solve_with_policy, Algorithm, GaConfig, SolveOptions};
use serde::{Deserialize, Serialize};

const DATA_DIR_ENV: &str = "EDVRP_DATA_DIR";

/// Entrance dependent vehicle routing for farm fleets.
#[derive(Parser)]
#[command(name = "edvrp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded scenarios with layout sidecars.
    Gen(GenArgs),
    /// Solve one scenario and print a metrics row.
    Solve(SolveArgs),
    /// Evaluate a plan on a scenario.
    Eval(EvalArgs),
    /// Serve the episode protocol over TCP or stdio.
    ServeEnv(ServeArgs),
    /// Snapshot a plan mid-operation and re-plan after a field or fleet change.
    Dynamic(DynamicArgs),
    /// Draw a layout, a plan or a dynamic re-plan as SVG.
    Render(RenderArgs),
    /// Run a benchmark manifest.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SingleDepot,
    PerVehicle,
}

impl From<ModeArg> for TerminalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SingleDepot => TerminalMode::SingleDepot,
            ModeArg::PerVehicle => TerminalMode::PerVehicleTerminals,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TerminalsArg {
    Depot,
    RandomJunctions,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    RateTime,
    Reciprocal,
}

impl From<ConventionArg> for FuelConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::RateTime => FuelConvention::RateTime,
            ConventionArg::Reciprocal => FuelConvention::Reciprocal,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Plots per scenario; drawn from 2..=6 when omitted.
    #[arg(long)]
    plots: Option<usize>,
    /// Vehicles per scenario; drawn from 2..=6 when omitted.
    #[arg(long)]
    vehicles: Option<usize>,
    /// Seed of the first scenario; scenario i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output directory [default: $EDVRP_DATA_DIR or ./data].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "single-depot")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "depot")]
    terminals: TerminalsArg,
}

#[derive(Args)]
struct SolverArgs {
    /// Objective to optimise: s (distance), t (time) or c (fuel).
    #[arg(long, default_value = "s")]
    objective: Objective,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "rate-time")]
    fuel_convention: ConventionArg,
    /// Genetic search generations; overrides the time budget.
    #[arg(long)]
    generations: Option<usize>,
    /// Genetic search wall-clock budget in seconds.
    #[arg(long, default_value_t = 14.0)]
    time_budget: f64,
    /// Act-request server for `--algo policy` (host:port).
    #[arg(long, env = "EDVRP_POLICY_ENDPOINT")]
    policy_endpoint: Option<String>,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        let mut o = SolveOptions::new(self.objective, self.seed);
        o.convention = self.fuel_convention.into();
        o.ga = match self.generations {
            Some(g) => GaConfig::generations(g, self.seed),
            None => GaConfig {
                seed: self.seed,
                time_budget_s: Some(self.time_budget),
                ..GaConfig::default()
            },
        };
        o
    }

    fn solve(&self, algo: Algorithm, scenario: &Arc<Scenario<f64>>, tag: &str) -> Result<(Plan, f64)> {
        let options = self.options();
        if algo == Algorithm::Policy {
            let endpoint = self.policy_endpoint.as_deref().context("--algo policy needs --policy-endpoint")?;
            let client = LineClient::connect(endpoint).with_context(|| format!("connecting to {endpoint}"))?;
            let mut policy = RemotePolicy::new(client, tag);
            let clock = Instant::now();
            let plan = solve_with_policy(scenario, options.objective, options.convention, &mut policy)?;
            return Ok((plan, clock.elapsed().as_secs_f64()));
        }
        let s = solve(scenario, algo, &options)?;
        Ok((s.plan, s.runtime.as_secs_f64()))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// ra, oga, exact, greedy or policy.
    #[arg(long, default_value = "oga")]
    algo: Algorithm,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the plan here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, value_enum, default_value = "rate-time")]
    fuel_convention: ConventionArg,
}

#[derive(Args)]
struct ServeArgs {
    /// TCP address to listen on.
    #[arg(long, default_value = "127.0.0.1:7878", conflicts_with = "stdio")]
    listen: String,
    /// Serve a single connection over stdin/stdout.
    #[arg(long)]
    stdio: bool,
    #[arg(long, default_value_t = 256)]
    max_sessions: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    FieldIncrease,
    VehicleDecrease,
}

#[derive(Clone, Copy, ValueEnum)]
enum MidLineArg {
    Finish,
    Abort,
}

#[derive(Args)]
struct DynamicArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Snapshot time as a fraction of the first-phase makespan.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Algorithm used for both phases.
    #[arg(long, default_value = "greedy")]
    solver: Algorithm,
    #[command(flatten)]
    options: SolverArgs,
    #[arg(long)]
    scenario: PathBuf,
    /// Plots worked in the first phase of field-increase; the rest are added
    /// at the snapshot [default: half of the plots].
    #[arg(long)]
    initial_plots: Option<usize>,
    /// Vehicles leaving at the snapshot [default: the last one].
    #[arg(long, value_delimiter = ',')]
    remove: Vec<usize>,
    /// What a removed vehicle does with a half-worked line.
    #[arg(long, value_enum, default_value = "finish")]
    mid_line: MidLineArg,
    /// Metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full outcome as JSON, usable by `render --snapshot`.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, conflicts_with = "snapshot")]
    plan: Option<PathBuf>,
    /// Outcome file written by `dynamic --record`.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Rows CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Base directory for scenario paths [default: the manifest's directory].
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

/// Written by `dynamic --record`.
#[derive(Serialize, Deserialize)]
struct DynamicFile {
    version: u32,
    phase1_sites: GraphSites,
    phase1_plan: Plan,
    outcome: DynamicRecord,
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

/// Relative paths missing from the working directory are looked up in the
/// data directory.
fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        let alt = data_dir().join(path);
        if alt.exists() {
            return alt;
        }
    }
    path.to_path_buf()
}

fn load_scenario(path: &Path) -> Result<Arc<Scenario<f64>>> {
    let path = resolve(path);
    Ok(Arc::new(Scenario::load(&path).with_context(|| format!("loading scenario {}", path.display()))?))
}

fn load_instance(path: &Path) -> Result<Instance<f64>> {
    let path = resolve(path);
    let scenario = Scenario::load(&path).with_context(|| format!("loading scenario {}", path.display()))?;
    let sidecar = LayoutFile::sidecar_path(&path);
    let layout = LayoutFile::load(&sidecar).with_context(|| format!("loading layout {}", sidecar.display()))?;
    Ok(Instance::from_parts(scenario, layout)?)
}

fn scenario_id(path: &Path) -> String {
    edvrp::bench::scenario_id(path)
}

fn gen(args: &GenArgs) -> Result<()> {
    let dir = args.out_dir.clone().unwrap_or_else(data_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for seed in args.seed..args.seed + args.count {
        let mut spec = ScenarioSpec::sampled(seed);
        if let Some(p) = args.plots {
            spec.num_plots = p;
        }
        if let Some(m) = args.vehicles {
            spec.num_vehicles = m;
        }
        spec.mode = args.mode.into();
        spec.terminals = match args.terminals {
            TerminalsArg::Depot => TerminalPlacement::Depot,
            TerminalsArg::RandomJunctions => TerminalPlacement::RandomJunctions,
        };
        let instance = generate_scenario(&spec)?.instance::<f64>()?;
        let path = dir.join(format!("scenario-{seed:06}.json"));
        instance.scenario.save(&path)?;
        instance.layout_file().save(&LayoutFile::sidecar_path(&path))?;
        println!(
            "{}\tplots={}\tvehicles={}\tlines={}",
            path.display(),
            spec.num_plots,
            spec.num_vehicles,
            instance.scenario.graph.num_lines()
        );
    }
    Ok(())
}

fn metrics_header() -> &'static str {
    "scenario_id,algo,objective,distance_m,time_s,fuel_L,runtime_s"
}

fn metrics_row(id: &str, algo: Algorithm, objective: Objective, o: &ObjectiveVector<f64>, runtime: f64) -> String {
    let objective = if algo.uses_objective() { objective.to_string() } else { edvrp::bench::ANY_OBJECTIVE.into() };
    format!(
        "{id},{algo},{objective},{},{},{},{runtime}",
        o.total_transfer_distance, o.makespan, o.total_fuel
    )
}

fn solve_cmd(args: &SolveArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let (plan, runtime) = args.solver.solve(args.algo, &scenario, "solve")?;
    let convention = args.solver.fuel_convention.into();
    let o = evaluate_plan(&scenario.graph, &scenario.vehicles, &plan, convention)?;
    if let Some(out) = &args.out {
        PlanFile::save(&plan, out)?;
    }
    println!("{}", metrics_header());
    println!("{}", metrics_row(&scenario_id(&args.scenario), args.algo, args.solver.objective, &o, runtime));
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let plan = PlanFile::load(&resolve(&args.plan))?;
    let o = evaluate_plan(&scenario.graph, &scenario.vehicles, &plan, args.fuel_convention.into())?;
    println!("{}", serde_json::to_string_pretty(&o)?);
    Ok(())
}

fn serve_cmd(args: &ServeArgs) -> Result<()> {
    let hub = Arc::new(Hub::new(args.max_sessions));
    if args.stdio {
        serve_stdio(&hub)?;
        return Ok(());
    }
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve_tcp(listener, hub)?;
    Ok(())
}

fn dynamic_cmd(args: &DynamicArgs) -> Result<()> {
    let full = load_instance(&args.scenario)?;
    let layout = full.layout.clone();
    let convention: FuelConvention = args.options.fuel_convention.into();
    let (phase1, added) = match args.task {
        TaskArg::FieldIncrease => {
            let plots: Vec<usize> = {
                let mut p: Vec<usize> = full.sites.lines.iter().map(|l| layout.lines[l.source].plot).collect();
                p.dedup();
                p
            };
            if plots.len() < 2 {
                bail!("field-increase needs a scenario with at least two plots");
            }
            let keep = args.initial_plots.unwrap_or(plots.len() / 2);
            if keep == 0 || keep >= plots.len() {
                bail!("--initial-plots must be between 1 and {}", plots.len() - 1);
            }
            let initial = &plots[..keep];
            let sites = GraphSites {
                lines: full.sites.lines.iter().filter(|l| initial.contains(&layout.lines[l.source].plot)).cloned().collect(),
                ..full.sites.clone()
            };
            let phase1 = Instance::new(layout.clone(), sites, full.scenario.vehicles.clone())?;
            (phase1, plots[keep..].to_vec())
        }
        TaskArg::VehicleDecrease => (full.clone(), Vec::new()),
    };
    let phase1_scenario = Arc::new(phase1.scenario.clone());
    let (plan, _) = args.options.solve(args.solver, &phase1_scenario, "phase1")?;
    let snap = snapshot(&phase1, &plan, args.fraction, convention)?;
    let mut replan = |s: &Arc<Scenario<f64>>| -> edvrp::Result<Plan> {
        args.options
            .solve(args.solver, s, "phase2")
            .map(|(p, _)| p)
            .map_err(|e| edvrp::Error::Dynamic(format!("{e:#}")))
    };
    let outcome: DynamicOutcome = match args.task {
        TaskArg::FieldIncrease => rearrange_field_increase(&phase1, snap, &added, &mut replan)?,
        TaskArg::VehicleDecrease => {
            let m = phase1.scenario.graph.num_vehicles();
            let removed = if args.remove.is_empty() { vec![m.saturating_sub(1)] } else { args.remove.clone() };
            let mid = match args.mid_line {
                MidLineArg::Finish => MidLineRemoval::FinishLine,
                MidLineArg::Abort => MidLineRemoval::Abort,
            };
            rearrange_vehicle_decrease(&phase1, snap, &removed, mid, &mut replan)?
        }
    };

    let task = match args.task {
        TaskArg::FieldIncrease => "field-increase",
        TaskArg::VehicleDecrease => "vehicle-decrease",
    };
    let id = scenario_id(&args.scenario);
    let snap = &outcome.snapshot;
    let sum = |f: fn(&edvrp::objectives::VehicleTotals<f64>) -> f64| snap.vehicles.iter().map(|v| f(&v.consumed)).sum::<f64>();
    let p2 = &outcome.phase2_objectives;
    let returns = |f: fn(&edvrp::objectives::VehicleTotals<f64>) -> f64| outcome.returns.iter().map(|r| f(&r.totals)).sum::<f64>();
    let t = &outcome.totals;
    let prefix = format!("{id},{task},{},{},{}", args.solver, args.options.objective, args.fraction);
    let mut csv = String::from("scenario_id,task,solver,objective,fraction,phase,distance_m,time_s,fuel_L,work_m\n");
    csv += &format!("{prefix},phase1,{},{},{},{}\n", sum(|v| v.distance), snap.time, sum(|v| v.fuel), sum(|v| v.work));
    csv += &format!(
        "{prefix},phase2,{},{},{},{}\n",
        p2.total_transfer_distance + returns(|v| v.distance),
        t.makespan - snap.time,
        p2.total_fuel + returns(|v| v.fuel),
        p2.total_work + returns(|v| v.work)
    );
    csv += &format!("{prefix},total,{},{},{},{}\n", t.distance, t.makespan, t.fuel, t.work);
    match &args.out {
        Some(path) => fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.record {
        let file = DynamicFile {
            version: 1,
            phase1_sites: phase1.sites.clone(),
            phase1_plan: plan,
            outcome: outcome.record(),
        };
        fs::write(path, serde_json::to_string(&file)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn render_cmd(args: &RenderArgs) -> Result<()> {
    let instance = load_instance(&args.scenario)?;
    let layout = &*instance.layout;
    let svg = match (&args.plan, &args.snapshot) {
        (Some(plan), _) => {
            let plan = PlanFile::load(&resolve(plan))?;
            render_field(&Scene {
                plan: Some(PlanLayer::new(&instance.sites, &plan)),
                ..Scene::field(layout)
            })?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: DynamicFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let o = &file.outcome;
            render_field(&Scene {
                layout,
                plan: Some(PlanLayer::new(&file.phase1_sites, &file.phase1_plan)),
                snapshot: Some(&o.snapshot),
                phase2: Some(PlanLayer {
                    sites: &o.phase2_sites,
                    plan: &o.plan,
                    vehicle_ids: Some(&o.phase2_vehicles),
                }),
            })?
        }
        (None, None) => render_field(&Scene::field(layout))?,
    };
    fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn bench_cmd(args: &BenchArgs) -> Result<bool> {
    let manifest = Manifest::load(&args.manifest).with_context(|| format!("loading manifest {}", args.manifest.display()))?;
    let base = match &args.data_dir {
        Some(d) => d.clone(),
        None => args.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let report = match &args.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            run_benchmark(&manifest, &base, args.jobs, file)?
        }
        None => run_benchmark(&manifest, &base, args.jobs, io::stdout().lock())?,
    };
    let summary = summarize(&report.rows);
    if let Some(path) = &args.summary {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_summary_csv(&summary, file)?;
    }
    let mut err = io::stderr().lock();
    write!(err, "{}", summary_table(&summary))?;
    for f in &report.failures {
        writeln!(
            err,
            "failed: scenario {} algo {} objective {:?} seed {}: {}",
            manifest.scenarios[f.job.scenario].display(),
            f.job.algorithm,
            f.job.objective.map(|o| o.to_string()),
            f.job.seed,
            f.error
        )?;
    }
    Ok(report.is_complete())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::ServeEnv(a) => serve_cmd(a),
        Command::Dynamic(a) => dynamic_cmd(a),
        Command::Render(a) => render_cmd(a),
        Command::Bench(a) => {
            if !bench_cmd(a)? {
                std::process::exit(1);
            }
            Ok(())
        }
    }
}
