//! Experiment configuration: a TOML document with strict keys.
//!
//! Parsing happens in two passes. Serde rejects malformed documents and
//! unknown keys; [`ExperimentSpec::build`] then checks every cross-reference
//! and reports all problems at once, each prefixed with its key path.
//!
//! ```toml
//! name = "logistic"
//! seed = 0
//!
//! [space]
//! kind = "grid"
//! lo = [0.5, 0.5]
//! hi = [1.5, 1.5]
//! counts = [5, 5]
//!
//! [rates]
//! family = "logistic_paper"
//! q1 = { coord = 0 }      # scalar, vector, or a strategy coordinate
//! q2 = { coord = 1 }
//!
//! [kernel]
//! kind = "pure_selection"
//!
//! [initial]
//! kind = "weights"
//! weights = 0.04
//!
//! [integrator]
//! scheme = "picard"
//! dt = 0.01
//! t_end = 200.0
//!
//! [output]
//! cadence = 1.0
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{profile, AsymptoticProfile, ProfileOptions};
use crate::bl::{DiscreteMeasure, MutationKernel};
use crate::dynamics::{step_count, EvolveOptions, PicardOptions, Scheme, PICARD_SUBSTEPS};
use crate::error::{Error, Result};
use crate::rates::VitalRates;
use crate::space::{Metric, StrategySpace};

/// A per-strategy parameter: broadcast scalar, explicit vector, or one
/// coordinate of each strategy point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    Coord {
        coord: usize,
    },
}

impl ParamSpec {
    fn resolve(&self, path: &str, space: &StrategySpace, errors: &mut Vec<String>) -> Vec<f64> {
        let m = space.len();
        match self {
            ParamSpec::Scalar(v) => vec![*v; m],
            ParamSpec::Vector(v) => {
                if v.len() != m {
                    errors.push(format!("{path}: length {}, expected {m}", v.len()));
                }
                v.clone()
            }
            ParamSpec::Coord { coord } => {
                if *coord >= space.dim() {
                    errors.push(format!(
                        "{path}: coordinate {coord} out of range for dimension {}",
                        space.dim()
                    ));
                    return vec![0.0; m];
                }
                space.points().iter().map(|p| p[*coord]).collect()
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// `grid` or `explicit`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Explicit distance matrix; Euclidean when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skip_validation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    /// `logistic_paper`, `logistic_a2`, `ricker` or `beverton_holt`.
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<ParamSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q2: Option<ParamSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<ParamSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<ParamSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<ParamSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    /// Overrides the default `ceil(K_max) + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// `pure_selection`, `smoothed` or `explicit`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// `matrix[i][j]`: mass that parent `j` sends to offspring `i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// `dirac`, `weights` or `density`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<ParamSpec>,
    /// Density in the coordinates `q0, q1, ...`, integrated with the
    /// space's quadrature weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    /// Defaults to `20 / varpi` rounded up to a whole number of output
    /// intervals; required when `varpi = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub lp_check: bool,
}

fn default_tol() -> f64 {
    PicardOptions::default().tol
}

fn default_max_iter() -> usize {
    PicardOptions::default().max_iter
}

fn default_substeps() -> usize {
    PICARD_SUBSTEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Time between output rows; must be a multiple of `dt`. Defaults to `dt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cadence: Option<f64>,
    /// Run directory, relative to the output root.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub target_distance: bool,
    /// Dirac target index; defaults to the strategy with the largest `K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_index: Option<usize>,
    #[serde(default = "yes")]
    pub residual: bool,
    #[serde(default = "yes")]
    pub trajectory: bool,
    /// Allowed excess over `K_max` in the dissipativity summary.
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn yes() -> bool {
    true
}

fn default_slack() -> f64 {
    0.01
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            cadence: None,
            dir: None,
            target_distance: true,
            target_index: None,
            residual: true,
            trajectory: true,
            slack: default_slack(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceSpec,
    pub rates: RatesSpec,
    pub kernel: KernelSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_name() -> String {
    "run".into()
}

/// A validated experiment with every object built.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub space: Arc<StrategySpace>,
    /// Rates as used by the integrator (truncated).
    pub rates: VitalRates,
    pub kernel: MutationKernel,
    pub initial: DiscreteMeasure,
    pub profile: AsymptoticProfile,
    pub evolve: EvolveOptions,
    pub t_end: f64,
    pub cadence: f64,
    pub target_index: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<Experiment> {
    ExperimentSpec::from_toml(text)?.build()
}

pub fn load_config(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(vec![e.message().to_string()]))
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Validation(vec![e.message().to_string()]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    /// Validate and construct; collects every problem found.
    pub fn build(&self) -> Result<Experiment> {
        let mut errors = Vec::new();

        let space = match self.build_space(&mut errors) {
            Some(s) => Arc::new(s),
            None => return Err(Error::Validation(errors)),
        };
        let base_rates = self.build_rates(&space, &mut errors);
        let kernel = self.build_kernel(&space, &mut errors);
        let initial = self.build_initial(&space, &mut errors);
        let timing = self.check_integrator(base_rates.as_ref(), &mut errors);

        let profile = base_rates.as_ref().and_then(|r| {
            profile(r, &space, &ProfileOptions::default())
                .map_err(|e| errors.push(format!("rates: {e}")))
                .ok()
        });

        if let Some(t) = self.output.target_index {
            if t >= space.len() {
                errors.push(format!(
                    "output.target_index: {t} out of range for {} points",
                    space.len()
                ));
            }
        }
        if !(self.output.slack >= 0.0) {
            errors.push("output.slack: must be >= 0".into());
        }
        if let (Some(init), Scheme::Picard) = (&initial, self.integrator.scheme) {
            if !init.is_positive() {
                errors.push("initial: picard scheme needs nonnegative weights".into());
            }
        }

        let rates = match (&base_rates, &profile) {
            (Some(r), Some(p)) => {
                let level = self.rates.truncation.or_else(|| p.default_truncation());
                match level {
                    Some(n) => r
                        .truncate(n)
                        .map_err(|e| errors.push(format!("rates.truncation: {e}")))
                        .ok(),
                    None => Some(r.clone()),
                }
            }
            _ => None,
        };

        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let (rates, kernel, initial, profile, (t_end, cadence, evolve)) = (
            rates.unwrap(),
            kernel.unwrap(),
            initial.unwrap(),
            profile.unwrap(),
            timing.unwrap(),
        );
        let target_index = self.output.target_index.or_else(|| profile.fittest());
        Ok(Experiment {
            spec: self.clone(),
            space,
            rates,
            kernel,
            initial,
            profile,
            evolve,
            t_end,
            cadence,
            target_index,
        })
    }

    fn build_space(&self, errors: &mut Vec<String>) -> Option<StrategySpace> {
        let s = &self.space;
        let res = match s.kind.as_str() {
            "grid" => {
                let (Some(lo), Some(hi), Some(counts)) = (&s.lo, &s.hi, &s.counts) else {
                    errors.push("space: kind = grid needs lo, hi and counts".into());
                    return None;
                };
                StrategySpace::build_grid(lo, hi, counts)
            }
            "explicit" => {
                let Some(points) = &s.points else {
                    errors.push("space.points: required for kind = explicit".into());
                    return None;
                };
                let metric = match &s.metric {
                    Some(d) => Metric::Explicit(d.clone()),
                    None => Metric::Euclidean,
                };
                StrategySpace::build_with(
                    points.clone(),
                    metric,
                    s.quad_weights.clone(),
                    !s.skip_validation,
                )
            }
            other => {
                errors.push(format!("space.kind: unknown kind {other:?} (grid, explicit)"));
                return None;
            }
        };
        res.map_err(|e| errors.push(format!("space: {e}"))).ok()
    }

    fn build_rates(&self, space: &StrategySpace, errors: &mut Vec<String>) -> Option<VitalRates> {
        let r = &self.rates;
        let n_before = errors.len();
        let mut param = |name: &str, p: &Option<ParamSpec>| -> Vec<f64> {
            match p {
                Some(p) => p.resolve(&format!("rates.{name}"), space, errors),
                None => {
                    errors.push(format!("rates.{name}: required for family {}", r.family));
                    Vec::new()
                }
            }
        };
        let built = match r.family.as_str() {
            "logistic_paper" => {
                let (q1, q2) = (param("q1", &r.q1), param("q2", &r.q2));
                (errors.len() == n_before).then(|| VitalRates::logistic_paper(q1, q2))
            }
            "logistic_a2" => {
                let (q1, q2) = (param("q1", &r.q1), param("q2", &r.q2));
                let w0 = r.w0.unwrap_or_else(|| {
                    errors.push("rates.w0: required for family logistic_a2".into());
                    0.0
                });
                (errors.len() == n_before).then(|| VitalRates::logistic_a2(q1, q2, w0))
            }
            "ricker" | "beverton_holt" => {
                let (b, c, d1) = (param("b", &r.b), param("c", &r.c), param("d1", &r.d1));
                let w0 = r.w0.unwrap_or_else(|| {
                    errors.push(format!("rates.w0: required for family {}", r.family));
                    0.0
                });
                (errors.len() == n_before).then(|| {
                    if r.family == "ricker" {
                        VitalRates::ricker(b, c, w0, d1)
                    } else {
                        VitalRates::beverton_holt(b, c, w0, d1)
                    }
                })
            }
            other => {
                errors.push(format!(
                    "rates.family: unknown family {other:?} \
                     (logistic_paper, logistic_a2, ricker, beverton_holt)"
                ));
                None
            }
        };
        match built {
            Some(Ok(v)) => Some(v),
            Some(Err(e)) => {
                errors.push(format!("rates: {e}"));
                None
            }
            None => None,
        }
    }

    fn build_kernel(
        &self,
        space: &Arc<StrategySpace>,
        errors: &mut Vec<String>,
    ) -> Option<MutationKernel> {
        let k = &self.kernel;
        let res = match k.kind.as_str() {
            "pure_selection" => MutationKernel::pure_selection(space.clone()),
            "smoothed" => match k.bandwidth {
                Some(h) => MutationKernel::smoothed(space.clone(), h),
                None => {
                    errors.push("kernel.bandwidth: required for kind = smoothed".into());
                    return None;
                }
            },
            "explicit" => match &k.matrix {
                Some(mat) => {
                    let m = space.len();
                    if mat.len() != m || mat.iter().any(|r| r.len() != m) {
                        errors.push(format!("kernel.matrix: must be {m} x {m}"));
                        return None;
                    }
                    MutationKernel::from_columns(space.clone(), mat)
                }
                None => {
                    errors.push("kernel.matrix: required for kind = explicit".into());
                    return None;
                }
            },
            other => {
                errors.push(format!(
                    "kernel.kind: unknown kind {other:?} (pure_selection, smoothed, explicit)"
                ));
                return None;
            }
        };
        res.map_err(|e| errors.push(format!("kernel: {e}"))).ok()
    }

    fn build_initial(
        &self,
        space: &Arc<StrategySpace>,
        errors: &mut Vec<String>,
    ) -> Option<DiscreteMeasure> {
        let init = &self.initial;
        match init.kind.as_str() {
            "dirac" => {
                let Some(index) = init.index else {
                    errors.push("initial.index: required for kind = dirac".into());
                    return None;
                };
                DiscreteMeasure::dirac(space.clone(), index, init.mass.unwrap_or(1.0))
                    .map_err(|e| errors.push(format!("initial.index: {e}")))
                    .ok()
            }
            "weights" => {
                let Some(w) = &init.weights else {
                    errors.push("initial.weights: required for kind = weights".into());
                    return None;
                };
                let before = errors.len();
                let w = w.resolve("initial.weights", space, errors);
                (errors.len() == before).then(|| DiscreteMeasure::new(space.clone(), w).ok())?
            }
            "density" => {
                let Some(expr) = &init.density else {
                    errors.push("initial.density: required for kind = density".into());
                    return None;
                };
                match sample_density(expr, space) {
                    Ok(values) => DiscreteMeasure::from_density(space.clone(), &values).ok(),
                    Err(e) => {
                        errors.push(format!("initial.density: {e}"));
                        None
                    }
                }
            }
            other => {
                errors.push(format!(
                    "initial.kind: unknown kind {other:?} (dirac, weights, density)"
                ));
                None
            }
        }
    }

    fn check_integrator(
        &self,
        rates: Option<&VitalRates>,
        errors: &mut Vec<String>,
    ) -> Option<(f64, f64, EvolveOptions)> {
        let i = &self.integrator;
        let before = errors.len();
        if let Err(e) = step_count(0.0, i.dt) {
            errors.push(format!("integrator: {e}"));
        }
        if !(i.tol > 0.0) {
            errors.push("integrator.tol: must be > 0".into());
        }
        if i.max_iter == 0 {
            errors.push("integrator.max_iter: must be >= 1".into());
        }
        if i.substeps == 0 {
            errors.push("integrator.substeps: must be >= 1".into());
        }
        let cadence = self.output.cadence.unwrap_or(i.dt);
        if i.dt > 0.0 && step_count(cadence, i.dt).map_or(true, |n| n == 0) {
            errors.push(format!(
                "output.cadence: {cadence} must be a positive multiple of dt = {}",
                i.dt
            ));
        }
        if errors.len() > before {
            return None;
        }
        let t_end = match (i.t_end, rates.map(VitalRates::varpi)) {
            (Some(t), _) => t,
            (None, Some(w)) if w > 0.0 => cadence * (20.0 / w / cadence - 1e-9).ceil(),
            (None, Some(_)) => {
                errors.push("integrator.t_end: required when the inherent mortality is 0".into());
                return None;
            }
            (None, None) => return None,
        };
        if let Err(e) = step_count(t_end, i.dt) {
            errors.push(format!("integrator: {e}"));
            return None;
        }
        Some((
            t_end,
            cadence,
            EvolveOptions {
                scheme: i.scheme,
                dt: i.dt,
                picard: PicardOptions {
                    tol: i.tol,
                    max_iter: i.max_iter,
                    substeps: i.substeps,
                    lp_check: i.lp_check,
                },
            },
        ))
    }
}

/// Evaluate a density expression at every strategy point. Variables are
/// `q0, q1, ...`, plus `pi` and the functions `exp ln sqrt abs sin cos tanh`;
/// the result must be a finite number.
pub fn sample_density(expr: &str, space: &StrategySpace) -> Result<Vec<f64>> {
    use evalexpr::{
        build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables,
        EvalexprError, Function, HashMapContext, Value,
    };

    let unary: [(&str, fn(f64) -> f64); 7] = [
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tanh", f64::tanh),
    ];
    let mut base = HashMapContext::new();
    for (name, f) in unary {
        base.set_function(
            name.into(),
            Function::new(move |v: &Value| -> std::result::Result<Value, EvalexprError> {
                Ok(Value::Float(f(v.as_number()?)))
            }),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
    }
    base.set_value("pi".into(), Value::Float(std::f64::consts::PI))
        .map_err(|e| Error::Config(e.to_string()))?;

    let tree = build_operator_tree(expr).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(space.len());
    for p in space.points() {
        let mut ctx = base.clone();
        for (k, x) in p.iter().enumerate() {
            ctx.set_value(format!("q{k}"), Value::Float(*x))
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let v = tree
            .eval_number_with_context(&ctx)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("density is {v} at {p:?}")));
        }
        out.push(v);
    }
    Ok(out)
}
