use std::path::PathBuf;

use edvrp::bench::{run_benchmark, summarize, Manifest, Row, ANY_OBJECTIVE};
use edvrp::scenario::{generate_scenario, ScenarioSpec};
use edvrp::solvers::{Algorithm, GaConfig};
use edvrp::Error;

fn write_scenarios(dir: &std::path::Path, seeds: &[u64]) -> Vec<PathBuf> {
    seeds
        .iter()
        .map(|&seed| {
            let mut spec = ScenarioSpec::new(2, 2, seed);
            spec.lines_per_plot = (4, 6);
            let inst = generate_scenario(&spec).unwrap().instance::<f64>().unwrap();
            let name = PathBuf::from(format!("s{seed}.json"));
            inst.scenario.save(&dir.join(&name)).unwrap();
            name
        })
        .collect()
}

fn run(manifest: &Manifest, base: &std::path::Path, jobs: usize) -> (String, Vec<Row>) {
    let mut out = Vec::new();
    let report = run_benchmark(manifest, base, jobs, &mut out).unwrap();
    assert!(report.is_complete(), "{:?}", report.failures);
    (String::from_utf8(out).unwrap(), report.rows)
}

#[test]
fn random_arrangement_alone_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = write_scenarios(dir.path(), &[1]);
    let manifest = Manifest::new(scenarios, vec![Algorithm::Ra]);
    let (csv, rows) = run(&manifest, dir.path(), 1);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].objective, ANY_OBJECTIVE);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario_id,algo,objective,distance_m,time_s,fuel_L,runtime_s,seed,total_distance_m"
    );
    assert!(lines.next().unwrap().starts_with("s1,ra,any,"));
    assert!(lines.next().is_none());
}

#[test]
fn reruns_and_job_counts_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::new(write_scenarios(dir.path(), &[2, 3, 4]), vec![Algorithm::Ra, Algorithm::Greedy, Algorithm::Oga]);
    manifest.seeds = vec![0, 1];
    manifest.ga = GaConfig::generations(30, 0);
    manifest.record_runtime = false;
    let (a, rows) = run(&manifest, dir.path(), 1);
    let (b, _) = run(&manifest, dir.path(), 4);
    let (c, _) = run(&manifest, dir.path(), 3);
    assert_eq!(a, b);
    assert_eq!(a, c);
    // 3 scenarios × (ra + 2 algorithms × 3 objectives) × 2 seeds
    assert_eq!(rows.len(), 3 * 7 * 2);
}

#[test]
fn summary_means_match_recomputation_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::new(write_scenarios(dir.path(), &[5, 6]), vec![Algorithm::Ra, Algorithm::Greedy]);
    manifest.seeds = vec![3, 4, 5];
    let (csv, _) = run(&manifest, dir.path(), 2);
    // parse the CSV text back, independent of the in-memory rows
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<Row> = reader.deserialize().map(|r| r.unwrap()).collect();
    for s in summarize(&rows) {
        let group: Vec<&Row> = rows.iter().filter(|r| r.algo == s.algo && r.objective == s.objective).collect();
        let n = group.len() as f64;
        assert_eq!(s.count, group.len());
        let mean = |f: fn(&Row) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        assert!((s.distance_m - mean(|r| r.distance_m)).abs() <= 1e-9 * s.distance_m);
        assert!((s.time_s - mean(|r| r.time_s)).abs() <= 1e-9 * s.time_s);
        assert!((s.fuel_l - mean(|r| r.fuel_l)).abs() <= 1e-9 * s.fuel_l);
        assert!((s.runtime_s - mean(|r| r.runtime_s)).abs() <= 1e-9 * s.runtime_s.max(1e-12));
    }
    let order: Vec<(String, String)> = summarize(&rows).into_iter().map(|s| (s.algo, s.objective)).collect();
    assert_eq!(order[0], ("ra".to_string(), "any".to_string()));
    assert_eq!(order.len(), 4);
}

#[test]
fn missing_scenario_aborts_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest::new(vec![PathBuf::from("nope.json")], vec![Algorithm::Ra]);
    let mut out = Vec::new();
    match run_benchmark(&manifest, dir.path(), 1, &mut out) {
        Err(Error::File { path, .. }) => assert!(path.ends_with("nope.json")),
        other => panic!("expected a file error, got {other:?}"),
    }
    assert!(out.is_empty());
}

#[test]
fn failed_entries_are_reported_and_others_kept() {
    let dir = tempfile::tempdir().unwrap();
    // exact search refuses 8+ line scenarios, random arrangement does not
    let manifest = Manifest::new(write_scenarios(dir.path(), &[7]), vec![Algorithm::Exact, Algorithm::Ra]);
    let mut out = Vec::new();
    let report = run_benchmark(&manifest, dir.path(), 2, &mut out).unwrap();
    assert!(!report.is_complete());
    assert_eq!(report.failures.len(), 3);
    assert_eq!(report.rows.len(), 1);
}

#[test]
fn manifest_file_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"version": 1, "scenarios": ["a.json"], "algorithms": ["ra", "oga"], "ga": {"generations": 10, "time_budget_s": null}}"#).unwrap();
    let m = Manifest::load(&path).unwrap();
    assert_eq!(m.ga.generations, Some(10));
    assert_eq!(m.objectives.len(), 3);
    std::fs::write(&path, r#"{"version": 2, "scenarios": ["a.json"], "algorithms": ["ra"]}"#).unwrap();
    assert!(matches!(Manifest::load(&path), Err(Error::Version { .. })));
    std::fs::write(&path, r#"{"version": 1, "scenarios": ["a.json"], "algorithms": ["policy"]}"#).unwrap();
    assert!(Manifest::load(&path).is_err());
}
