//! Run orchestration: simulate, flat-norm evaluation and parameter sweeps.
//!
//! Output layout for one run directory:
//!
//! - `trajectory.csv`: `t,w_0,...,w_{m-1}`, one row per cadence tick
//! - `diagnostics.csv`: `t,total_mass,mean_q0,...,flat_distance_to_target,min_weight,constraint_residual`
//! - `config.toml`: normalized echo of the experiment, enough to rerun it
//! - `manifest.json`: versions, timing, step size actually used, summary
//!
//! Floats are written as `{:.16e}` (17 significant digits) so every value
//! round-trips exactly. Empty fields mean "not defined at this row", e.g.
//! the residual at the first and last sample.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{dissipativity_check, DissipativityReport};
use crate::bl::{flat_distance, BLFunction, DiscreteMeasure};
use crate::config::{Experiment, ExperimentSpec};
use crate::dynamics::{constraint_residual, evolve, EvolveOptions, Trajectory};
use crate::error::{Error, Result};
use crate::oracle;
use crate::space::{Metric, StrategySpace};

/// Environment variable overriding the directory that relative run
/// directories are resolved against.
pub const OUTPUT_ROOT_VAR: &str = "BLGAME_OUTPUT_ROOT";

/// How many times a failing run is retried with `dt / 2`.
pub const MAX_RETRIES: usize = 4;

/// Growth allowed in the dissipativity summary while mass exceeds `K_max`.
pub const GROWTH_TOL: f64 = 1e-6;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Directory for a run: `output.dir` if given, else `runs/<name>`, relative
/// to [`output_root`] unless absolute.
pub fn run_dir(spec: &ExperimentSpec) -> PathBuf {
    output_root().join(relative_run_dir(spec))
}

fn relative_run_dir(spec: &ExperimentSpec) -> PathBuf {
    match &spec.output.dir {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from("runs").join(&spec.name),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub total_mass: f64,
    pub mean_strategy: Vec<f64>,
    pub flat_distance_to_target: Option<f64>,
    pub min_weight: f64,
    /// Residual of the mass equation (`g = 1`).
    pub constraint_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub trajectory: Trajectory,
    /// Trajectory indices of the output rows.
    pub output_indices: Vec<usize>,
    pub rows: Vec<DiagnosticsRow>,
    pub dt: f64,
    pub retries: usize,
    pub target: Option<DiscreteMeasure>,
    pub dissipativity: DissipativityReport,
}

/// `K(i) delta_i` for the configured target, if `K(i)` is defined.
pub fn target_measure(exp: &Experiment) -> Result<Option<DiscreteMeasure>> {
    let Some(i) = exp.target_index else {
        return Ok(None);
    };
    match exp.profile.k[i] {
        Some(k) => Ok(Some(DiscreteMeasure::dirac(exp.space.clone(), i, k)?)),
        None => Ok(None),
    }
}

/// Integrate, halving `dt` after a step failure (at most [`MAX_RETRIES`] times).
pub fn integrate(exp: &Experiment) -> Result<(Trajectory, f64, usize)> {
    let mut opts: EvolveOptions = exp.evolve;
    let mut retries = 0;
    loop {
        match evolve(&exp.initial, &exp.kernel, &exp.rates, exp.t_end, &opts) {
            Ok(tr) => return Ok((tr, opts.dt, retries)),
            Err(Error::StepFailure { .. }) if retries < MAX_RETRIES => {
                retries += 1;
                opts.dt /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
}

pub fn simulate(exp: &Experiment) -> Result<Simulation> {
    let (trajectory, dt, retries) = integrate(exp)?;
    let stride = (exp.cadence / dt).round() as usize;
    let output_indices: Vec<usize> = (0..trajectory.len()).step_by(stride.max(1)).collect();
    let target = if exp.spec.output.target_distance {
        target_measure(exp)?
    } else {
        None
    };
    let one = BLFunction::constant(exp.space.clone(), 1.0);
    let want_residual = exp.spec.output.residual;

    let rows = output_indices
        .iter()
        .map(|&k| {
            let mu = &trajectory.states[k];
            let t = trajectory.times[k];
            let flat = target.as_ref().map(|tg| flat_distance(mu, tg)).transpose()?;
            let residual = if want_residual && k > 0 && k + 1 < trajectory.len() {
                Some(constraint_residual(&trajectory, &one, t)?)
            } else {
                None
            };
            Ok(DiagnosticsRow {
                t,
                total_mass: mu.total_mass(),
                mean_strategy: mu.mean_strategy(),
                flat_distance_to_target: flat,
                min_weight: mu.min_weight(),
                constraint_residual: residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dissipativity = dissipativity_check(
        &trajectory,
        &exp.profile,
        0.75 * exp.t_end,
        exp.spec.output.slack,
        GROWTH_TOL,
    )?;
    Ok(Simulation {
        trajectory,
        output_indices,
        rows,
        dt,
        retries,
        target,
        dissipativity,
    })
}

fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

fn opt(out: &mut String, x: Option<f64>) {
    if let Some(x) = x {
        num(out, x);
    }
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow], dim: usize) -> String {
    let mut out = String::from("t,total_mass");
    for k in 0..dim {
        write!(out, ",mean_q{k}").unwrap();
    }
    out.push_str(",flat_distance_to_target,min_weight,constraint_residual\n");
    for r in rows {
        num(&mut out, r.t);
        out.push(',');
        num(&mut out, r.total_mass);
        for &c in &r.mean_strategy {
            out.push(',');
            num(&mut out, c);
        }
        out.push(',');
        opt(&mut out, r.flat_distance_to_target);
        out.push(',');
        num(&mut out, r.min_weight);
        out.push(',');
        opt(&mut out, r.constraint_residual);
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(sim: &Simulation) -> String {
    let m = sim.trajectory.initial().len();
    let mut out = String::from("t");
    for i in 0..m {
        write!(out, ",w_{i}").unwrap();
    }
    out.push('\n');
    for &k in &sim.output_indices {
        num(&mut out, sim.trajectory.times[k]);
        for &w in sim.trajectory.states[k].weights() {
            out.push(',');
            num(&mut out, w);
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub dt: f64,
    pub retries: usize,
    pub steps: usize,
    pub final_mass: f64,
    pub final_target_distance: Option<f64>,
    pub min_weight: f64,
    /// `None` when no strategy has a carrying capacity.
    pub dissipative: Option<bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    package: &'static str,
    version: &'static str,
    config_file: &'static str,
    config: &'a ExperimentSpec,
    seed: u64,
    dt_requested: f64,
    t_end: f64,
    wall_time_s: f64,
    strategies: usize,
    carrying_capacity: &'a [Option<f64>],
    k_max: Option<f64>,
    target_index: Option<usize>,
    dissipativity: &'a DissipativityReport,
    summary: &'a RunSummary,
    files: [&'static str; 3],
}

/// Run the experiment and write its directory. The run directory is
/// created if needed; existing files in it are overwritten.
pub fn run_simulate(exp: &Experiment, dir: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let sim = simulate(exp)?;
    std::fs::create_dir_all(dir)?;

    let dim = exp.space.dim();
    std::fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&sim.rows, dim))?;
    if exp.spec.output.trajectory {
        std::fs::write(dir.join("trajectory.csv"), trajectory_csv(&sim))?;
    }
    std::fs::write(dir.join("config.toml"), exp.spec.to_toml())?;

    let last = sim.rows.last().expect("at least the initial row");
    let summary = RunSummary {
        name: exp.spec.name.clone(),
        dir: dir.to_path_buf(),
        dt: sim.dt,
        retries: sim.retries,
        steps: sim.trajectory.len() - 1,
        final_mass: last.total_mass,
        final_target_distance: last.flat_distance_to_target,
        min_weight: sim.trajectory.min_weight(),
        dissipative: sim
            .dissipativity
            .applicable
            .then(|| sim.dissipativity.passed()),
    };
    let manifest = Manifest {
        name: &exp.spec.name,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_file: "config.toml",
        config: &exp.spec,
        seed: exp.spec.seed,
        dt_requested: exp.evolve.dt,
        t_end: exp.t_end,
        wall_time_s: start.elapsed().as_secs_f64(),
        strategies: exp.space.len(),
        carrying_capacity: &exp.profile.k,
        k_max: exp.profile.k_diamond,
        target_index: exp.target_index,
        dissipativity: &sim.dissipativity,
        summary: &summary,
        files: ["trajectory.csv", "diagnostics.csv", "config.toml"],
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Other(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatnormReport {
    pub norm: f64,
    pub total_mass: f64,
    pub support: usize,
    pub oracle: Option<f64>,
}

/// Parse `weight,x0,x1,...` lines (Euclidean coordinates). Blank lines and
/// lines starting with `#` are skipped, as is a header whose first field is
/// not a number.
pub fn parse_weighted_points(text: &str) -> Result<DiscreteMeasure> {
    let mut weights = Vec::new();
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if weights.is_empty() && points.is_empty() && n == 0 => continue,
            Err(e) => return Err(Error::Config(format!("line {}: {e}", n + 1))),
        };
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "line {}: expected weight followed by at least one coordinate",
                n + 1
            )));
        }
        weights.push(values[0]);
        points.push(values[1..].to_vec());
    }
    if weights.is_empty() {
        return Err(Error::Config("no weighted points in input".into()));
    }
    let space = StrategySpace::build_explicit(points, Metric::Euclidean)?;
    DiscreteMeasure::new(Arc::new(space), weights)
}

pub fn run_flatnorm(text: &str, with_oracle: bool) -> Result<FlatnormReport> {
    let mu = parse_weighted_points(text)?;
    let norm = mu.flat_norm()?;
    let oracle = if with_oracle {
        Some(oracle::flat_norm_bruteforce(&mu)?)
    } else {
        None
    };
    Ok(FlatnormReport {
        norm,
        total_mass: mu.total_mass(),
        support: mu.weights().iter().filter(|&&w| w != 0.0).count(),
        oracle,
    })
}

/// `path=v1,v2,...` with a dotted key path into the config document.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub path: Vec<String>,
    pub values: Vec<toml::Value>,
}

impl SweepAxis {
    pub fn parse(spec: &str) -> Result<Self> {
        let (path, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis {spec:?} is not of the form path=v1,v2,...")))?;
        let path: Vec<String> = path.trim().split('.').map(|s| s.trim().to_string()).collect();
        if path.iter().any(String::is_empty) {
            return Err(Error::Config(format!("axis path {spec:?} has an empty segment")));
        }
        let values: Vec<toml::Value> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(parse_scalar)
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("axis {} has no values", path.join("."))));
        }
        Ok(Self { path, values })
    }

    pub fn key(&self) -> String {
        self.path.join(".")
    }
}

fn parse_scalar(s: &str) -> toml::Value {
    if let Ok(i) = s.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(x) = s.parse::<f64>() {
        toml::Value::Float(x)
    } else if let Ok(b) = s.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(s.to_string())
    }
}

fn set_path(doc: &mut toml::Value, path: &[String], value: toml::Value) -> Result<()> {
    let mut node = doc;
    for key in &path[..path.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("axis path: {key} is not inside a table")))?;
        node = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("axis path: {} is not a table", path.join("."))))?;
    table.insert(path[path.len() - 1].clone(), value);
    Ok(())
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn value_order(a: &toml::Value, b: &toml::Value) -> std::cmp::Ordering {
    let as_num = |v: &toml::Value| match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(x) => Some(*x),
        _ => None,
    };
    match (as_num(a), as_num(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => value_label(a).cmp(&value_label(b)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub axis: String,
    pub dir: PathBuf,
    pub rows: Vec<SweepRow>,
}

pub fn summary_csv(report: &SweepReport) -> String {
    let mut out = format!("{},final_mass,final_target_distance,dissipative,dt,retries,dir\n", report.axis);
    for r in &report.rows {
        let s = &r.summary;
        write!(out, "{},", r.value).unwrap();
        num(&mut out, s.final_mass);
        out.push(',');
        opt(&mut out, s.final_target_distance);
        let verdict = match s.dissipative {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "n/a",
        };
        write!(out, ",{verdict},").unwrap();
        num(&mut out, s.dt);
        let rel = s.dir.strip_prefix(&report.dir).unwrap_or(&s.dir);
        writeln!(out, ",{},{}", s.retries, rel.display()).unwrap();
    }
    out
}

/// One run per axis value, in parallel, each in its own subdirectory of
/// `<run dir of template>/sweep_<axis>`. All configurations are validated
/// before anything runs.
pub fn run_sweep(template: &str, axis: &SweepAxis) -> Result<SweepReport> {
    let doc: toml::Value = toml::from_str(template)
        .map_err(|e| Error::Validation(vec![e.message().to_string()]))?;
    let base = ExperimentSpec::from_value(doc.clone())?;
    let rel_root = relative_run_dir(&base).join(format!("sweep_{}", axis.key()));
    let root = output_root().join(&rel_root);

    let mut values = axis.values.clone();
    values.sort_by(value_order);
    values.dedup();

    let mut experiments = Vec::with_capacity(values.len());
    let mut errors = Vec::new();
    for (k, v) in values.iter().enumerate() {
        let label = value_label(v);
        let mut d = doc.clone();
        set_path(&mut d, &axis.path, v.clone())?;
        let rel = rel_root.join(format!("{k:03}_{label}"));
        let dir = output_root().join(&rel);
        let built = ExperimentSpec::from_value(d).and_then(|mut spec| {
            spec.name = format!("{}_{}={label}", base.name, axis.key());
            spec.output.dir = Some(rel.to_string_lossy().into_owned());
            spec.build()
        });
        match built {
            Ok(exp) => experiments.push((label, dir, exp)),
            Err(Error::Validation(list)) => {
                errors.extend(list.into_iter().map(|e| format!("[{}={label}] {e}", axis.key())))
            }
            Err(e) => errors.push(format!("[{}={label}] {e}", axis.key())),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }

    let rows = experiments
        .par_iter()
        .map(|(label, dir, exp)| {
            run_simulate(exp, dir).map(|summary| SweepRow {
                value: label.clone(),
                summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = SweepReport {
        axis: axis.key(),
        dir: root,
        rows,
    };
    std::fs::create_dir_all(&report.dir)?;
    std::fs::write(report.dir.join("summary.csv"), summary_csv(&report))?;
    Ok(report)
}
