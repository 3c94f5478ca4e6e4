use std::fs;

use blgame::config::{parse_config, ExperimentSpec};
use blgame::harness::{run_simulate, run_sweep, simulate, SweepAxis};
use blgame::Error;

const LOGISTIC: &str = r#"
name = "h"

[space]
kind = "grid"
lo = [0.5, 0.5]
hi = [1.5, 1.5]
counts = [3, 3]

[rates]
family = "logistic_a2"
q1 = { coord = 0 }
q2 = { coord = 1 }
w0 = 0.25

[kernel]
kind = "smoothed"
bandwidth = 0.1

[initial]
kind = "weights"
weights = 0.1

[integrator]
scheme = "picard"
dt = 0.02
t_end = 4.0

[output]
cadence = 0.2
"#;

#[test]
fn identical_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let exp = parse_config(LOGISTIC).unwrap();
    run_simulate(&exp, &dir.path().join("a")).unwrap();
    run_simulate(&exp, &dir.path().join("b")).unwrap();
    for f in ["diagnostics.csv", "trajectory.csv", "config.toml"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let exp = parse_config(LOGISTIC).unwrap();
    run_simulate(&exp, &dir.path().join("a")).unwrap();
    let echo = fs::read_to_string(dir.path().join("a/config.toml")).unwrap();
    let again = parse_config(&echo).unwrap();
    run_simulate(&again, &dir.path().join("b")).unwrap();
    assert_eq!(
        fs::read(dir.path().join("a/diagnostics.csv")).unwrap(),
        fs::read(dir.path().join("b/diagnostics.csv")).unwrap()
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["integrator"]["dt"], 0.02);
}

#[test]
fn diagnostics_layout() {
    let exp = parse_config(LOGISTIC).unwrap();
    let sim = simulate(&exp).unwrap();
    // one row per cadence tick, including both ends
    assert_eq!(sim.rows.len(), 21);
    let csv = blgame::harness::diagnostics_csv(&sim.rows, 2);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,total_mass,mean_q0,mean_q1,flat_distance_to_target,min_weight,constraint_residual"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(first[6], "");
    assert_eq!(last[6], "");
    assert!(!first[4].is_empty());
    for row in &sim.rows[1..sim.rows.len() - 1] {
        assert!(row.constraint_residual.is_some());
    }
}

#[test]
fn zero_horizon_gives_initial_state_only() {
    let exp = parse_config(&LOGISTIC.replace("t_end = 4.0", "t_end = 0.0")).unwrap();
    let sim = simulate(&exp).unwrap();
    assert_eq!(sim.rows.len(), 1);
    assert_eq!(sim.rows[0].t, 0.0);
    assert_eq!(sim.trajectory.last().weights(), exp.initial.weights());
}

#[test]
fn residual_column_shrinks_fourfold_with_dt() {
    let coarse = simulate(&parse_config(LOGISTIC).unwrap()).unwrap();
    let fine = simulate(&parse_config(&LOGISTIC.replace("dt = 0.02", "dt = 0.01")).unwrap()).unwrap();
    assert_eq!(coarse.rows.len(), fine.rows.len());
    for (a, b) in coarse.rows.iter().zip(&fine.rows).skip(1).take(10) {
        let ratio = a.constraint_residual.unwrap() / b.constraint_residual.unwrap();
        assert!((3.0..5.0).contains(&ratio), "t = {}: ratio {ratio}", a.t);
    }
}

#[test]
fn failing_steps_are_retried_with_half_dt() {
    // two iterations cannot reach 1e-14 at dt = 0.4; more halvings can't either
    let text = LOGISTIC
        .replace("dt = 0.02", "dt = 0.4\nmax_iter = 2\ntol = 1e-14")
        .replace("cadence = 0.2", "cadence = 0.4");
    let exp = parse_config(&text).unwrap();
    match simulate(&exp) {
        Err(Error::StepFailure { t, .. }) => assert_eq!(t, 0.0),
        other => panic!("expected a step failure, got {other:?}"),
    }

    // a step size that converges only after halving
    let text = LOGISTIC
        .replace("dt = 0.02", "dt = 0.8\nmax_iter = 12\ntol = 1e-12")
        .replace("cadence = 0.2", "cadence = 0.8");
    let sim = simulate(&parse_config(&text).unwrap()).unwrap();
    assert!(sim.retries > 0 && sim.retries <= 4, "retries {}", sim.retries);
    assert_eq!(sim.dt, 0.8 / f64::powi(2.0, sim.retries as i32));
    assert_eq!(sim.rows.len(), 6);
}

#[test]
fn sweep_runs_sorted_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::from_toml(LOGISTIC).unwrap();
    spec.output.dir = Some(dir.path().join("sw").to_string_lossy().into_owned());
    let template = spec.to_toml();
    let axis = SweepAxis::parse("kernel.bandwidth=1.0,0.01,0.1").unwrap();

    let first = run_sweep(&template, &axis).unwrap();
    let values: Vec<&str> = first.rows.iter().map(|r| r.value.as_str()).collect();
    assert_eq!(values, ["0.01", "0.1", "1.0"]);
    for r in &first.rows {
        assert!(r.summary.dir.join("manifest.json").exists());
    }
    let summary = dir.path().join("sw/sweep_kernel.bandwidth/summary.csv");
    let a = fs::read(&summary).unwrap();
    run_sweep(&template, &axis).unwrap();
    assert_eq!(a, fs::read(&summary).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn sweep_validates_every_value_first() {
    let axis = SweepAxis::parse("kernel.bandwidth=0.1,-1,0").unwrap();
    match run_sweep(LOGISTIC, &axis) {
        Err(Error::Validation(errs)) => assert_eq!(errs.len(), 2, "{errs:?}"),
        other => panic!("expected validation errors, got {other:?}"),
    }
    assert!(SweepAxis::parse("kernel.bandwidth=").is_err());
}
