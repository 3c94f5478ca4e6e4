//! Built-in invariant suites.
//!
//! Every check draws its random instances from a ChaCha stream keyed by the
//! suite seed and the check's position in [`CHECKS`], so a single check run
//! on its own sees the same cases as inside the full suite. Each check
//! reports a case count and its worst margin (`bound - value`; negative
//! beyond the tolerance means failure).

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics::{dissipativity_check, profile, ProfileOptions};
use crate::bl::{
    flat_distance, function_bullet, kernel_sup_norm_dist, BLFunction, DiscreteMeasure,
    MeasureFamily, MutationKernel,
};
use crate::dynamics::{evolve, picard_step_detailed, EvolveOptions, GameState, PicardOptions};
use crate::error::{Error, Result};
use crate::oracle::{flat_norm_bruteforce, MAX_SUPPORT};
use crate::rates::VitalRates;
use crate::space::{Metric, StrategySpace};

/// Check names, in suite order.
pub const CHECKS: &[&str] = &[
    "oracle_equivalence",
    "positive_mass_identity",
    "norm_inequalities",
    "bullet_bilinearity",
    "bullet_mass_law",
    "bullet_estimates",
    "positivity",
    "semiflow",
    "lipschitz_dependence",
    "dissipativity",
    "integrator_crosscheck",
    "measure_form",
];

/// Suite ids accepted besides single check names.
pub const SUITES: &[&str] = &["builtin", "quick"];

/// Deliberate defects for exercising the failure path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Scale column 0 of every random kernel so it sums to `sum`.
    KernelColumnSum(f64),
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub suite: String,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suite: "builtin".into(),
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst_margin: f64,
    /// First failing case, if any.
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("suite {} seed {}\n", self.suite, self.seed);
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "{status} {:<24} cases={:<4} failures={:<4} worst_margin={:.3e}",
                c.name, c.cases, c.failures, c.worst_margin
            )
            .unwrap();
            if let Some(d) = &c.detail {
                writeln!(out, "     first failure: {d}").unwrap();
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        writeln!(
            out,
            "{} of {} checks passed",
            self.checks.len() - failed,
            self.checks.len()
        )
        .unwrap();
        out
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: f64,
    detail: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: f64::INFINITY,
            detail: None,
        }
    }

    /// Passes when `margin >= -tol`.
    fn record(&mut self, margin: f64, tol: f64, ctx: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.min(margin);
        if !(margin >= -tol) {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(format!("{} (margin {margin:.3e})", ctx()));
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst_margin: self.worst,
            detail: self.detail,
        }
    }
}

#[derive(Clone, Copy)]
struct Scale {
    lp_cases: usize,
    runs: usize,
}

struct Ctx {
    seed: u64,
    fault: Option<Fault>,
    scale: Scale,
    /// Smallest weight seen in any Picard run of the suite.
    min_picard_weight: f64,
    picard_runs: usize,
}

impl Ctx {
    fn rng(&self, name: &str) -> ChaCha8Rng {
        let stream = CHECKS.iter().position(|c| *c == name).unwrap_or(CHECKS.len()) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn note_picard(&mut self, traj_min: f64) {
        self.picard_runs += 1;
        self.min_picard_weight = self.min_picard_weight.min(traj_min);
    }
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let (names, scale): (Vec<&'static str>, Scale) = match opts.suite.as_str() {
        "builtin" => (CHECKS.to_vec(), Scale { lp_cases: 200, runs: 20 }),
        "quick" => (CHECKS.to_vec(), Scale { lp_cases: 40, runs: 5 }),
        other => match CHECKS.iter().find(|c| **c == other) {
            Some(c) => (vec![*c], Scale { lp_cases: 200, runs: 20 }),
            None => {
                return Err(Error::Config(format!(
                    "unknown suite {other:?}; expected one of {} or a check name ({})",
                    SUITES.join(", "),
                    CHECKS.join(", ")
                )))
            }
        },
    };
    let mut ctx = Ctx {
        seed: opts.seed,
        fault: opts.fault,
        scale,
        min_picard_weight: f64::INFINITY,
        picard_runs: 0,
    };
    let mut checks = Vec::new();
    // positivity aggregates the other runs, so it goes last
    for name in names.iter().filter(|n| **n != "positivity") {
        let r = match *name {
            "oracle_equivalence" => oracle_equivalence(&ctx)?,
            "positive_mass_identity" => positive_mass_identity(&ctx)?,
            "norm_inequalities" => norm_inequalities(&ctx)?,
            "bullet_bilinearity" => bullet_bilinearity(&ctx)?,
            "bullet_mass_law" => bullet_mass_law(&ctx)?,
            "bullet_estimates" => bullet_estimates(&ctx)?,
            "semiflow" => semiflow(&mut ctx)?,
            "lipschitz_dependence" => lipschitz_dependence(&mut ctx)?,
            "dissipativity" => dissipativity(&mut ctx)?,
            "integrator_crosscheck" => integrator_crosscheck(&mut ctx)?,
            "measure_form" => measure_form(&ctx)?,
            _ => unreachable!(),
        };
        checks.push(r);
    }
    if names.contains(&"positivity") {
        checks.push(positivity(&mut ctx)?);
    }
    Ok(VerifyReport {
        suite: opts.suite.clone(),
        seed: opts.seed,
        checks,
    })
}

fn random_space(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> Result<Arc<StrategySpace>> {
    let points = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..2.0)).collect())
        .collect();
    Ok(Arc::new(StrategySpace::build_explicit(points, Metric::Euclidean)?))
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Column-stochastic matrix with a heavy diagonal.
fn random_stochastic(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; m]; m];
    for j in 0..m {
        let col: Vec<f64> = (0..m)
            .map(|i| rng.gen_range(0.0..1.0) + if i == j { 2.0 } else { 0.0 })
            .collect();
        let total: f64 = col.iter().sum();
        for i in 0..m {
            a[i][j] = col[i] / total;
        }
    }
    a
}

fn kernel_with_fault(
    space: Arc<StrategySpace>,
    mut matrix: Vec<Vec<f64>>,
    fault: Option<Fault>,
) -> Result<MutationKernel> {
    match fault {
        None => MutationKernel::from_columns(space, &matrix),
        Some(Fault::KernelColumnSum(sum)) => {
            let total: f64 = matrix.iter().map(|r| r[0]).sum();
            for row in matrix.iter_mut() {
                row[0] *= sum / total;
            }
            Ok(MutationKernel::unchecked(MeasureFamily::from_matrix(
                space, &matrix,
            )?))
        }
    }
}

fn random_logistic(rng: &mut ChaCha8Rng, m: usize) -> Result<VitalRates> {
    let q1 = random_weights(rng, m, 1.5, 3.0);
    let q2 = random_weights(rng, m, 0.5, 1.5);
    VitalRates::logistic_a2(q1, q2, 1.0)
}

fn oracle_equivalence(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("oracle_equivalence");
    let mut t = Tally::new("oracle_equivalence");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(1..=MAX_SUPPORT);
        let dim = rng.gen_range(1..=2);
        let space = random_space(&mut rng, m, dim)?;
        let mu = DiscreteMeasure::new(space, random_weights(&mut rng, m, -2.0, 2.0))?;
        let lp = mu.flat_norm()?;
        let brute = flat_norm_bruteforce(&mu)?;
        t.record(-(lp - brute).abs(), 1e-9, || {
            format!("case {case}: lp {lp} vs oracle {brute}, weights {:?}", mu.weights())
        });
    }
    Ok(t.finish())
}

fn positive_mass_identity(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("positive_mass_identity");
    let mut t = Tally::new("positive_mass_identity");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(1..=8);
        let space = random_space(&mut rng, m, 2)?;
        let mu = DiscreteMeasure::new(space, random_weights(&mut rng, m, 0.0, 2.0))?;
        let (flat, mass) = (mu.flat_norm()?, mu.total_mass());
        t.record(-(flat - mass).abs(), 1e-9, || {
            format!("case {case}: flat {flat} vs mass {mass}")
        });
    }
    Ok(t.finish())
}

fn norm_inequalities(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("norm_inequalities");
    let mut t = Tally::new("norm_inequalities");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(2..=6);
        let space = random_space(&mut rng, m, 2)?;
        let mu = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, -1.0, 1.0))?;
        let nu = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, -1.0, 1.0))?;
        let g = BLFunction::new(space, random_weights(&mut rng, m, -1.0, 1.0))?;
        let (fm, fn_) = (mu.flat_norm()?, nu.flat_norm()?);
        // flat <= l1
        t.record(mu.l1_norm() - fm, 1e-9, || format!("case {case}: flat exceeds l1"));
        // |mu[g]| <= ||g||_BL ||mu||
        let pair = mu.pair(&g)?;
        t.record(g.norms().bl * fm - pair.abs(), 1e-9, || {
            format!("case {case}: |mu[g]| = {pair} above dual bound")
        });
        // triangle
        let sum = mu.add(&nu)?.flat_norm()?;
        t.record(fm + fn_ - sum, 1e-9, || format!("case {case}: triangle inequality"));
    }
    Ok(t.finish())
}

fn bullet_bilinearity(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("bullet_bilinearity");
    let mut t = Tally::new("bullet_bilinearity");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(1..=8);
        let space = random_space(&mut rng, m, 2)?;
        let fam = MeasureFamily::from_matrix(
            space.clone(),
            &(0..m).map(|_| random_weights(&mut rng, m, -1.0, 1.0)).collect::<Vec<_>>(),
        )?;
        let mu = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, -1.0, 1.0))?;
        let nu = DiscreteMeasure::new(space, random_weights(&mut rng, m, -1.0, 1.0))?;
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let lhs = fam.bullet(&mu.combine(a, &nu, b)?)?;
        let rhs = fam.bullet(&mu)?.combine(a, &fam.bullet(&nu)?, b)?;
        let err = lhs
            .weights()
            .iter()
            .zip(rhs.weights())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        t.record(-err, 1e-12, || format!("case {case}: max deviation {err:e}"));
    }
    Ok(t.finish())
}

fn bullet_mass_law(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("bullet_mass_law");
    let mut t = Tally::new("bullet_mass_law");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(1..=8);
        let space = random_space(&mut rng, m, 2)?;
        let matrix = random_stochastic(&mut rng, m);
        let gamma = kernel_with_fault(space.clone(), matrix, ctx.fault)?;
        let mu = DiscreteMeasure::new(space, random_weights(&mut rng, m, 0.0, 2.0))?;
        let pushed = gamma.bullet(&mu)?.total_mass();
        let mass = mu.total_mass();
        t.record(-(pushed - mass).abs(), 1e-12 * (1.0 + mass), || {
            format!("case {case}: mass {mass} becomes {pushed} under the kernel")
        });
    }
    Ok(t.finish())
}

fn bullet_estimates(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("bullet_estimates");
    let mut t = Tally::new("bullet_estimates");
    for case in 0..ctx.scale.lp_cases {
        let m = rng.gen_range(2..=6);
        let space = random_space(&mut rng, m, 2)?;
        let fam = MeasureFamily::from_matrix(
            space.clone(),
            &(0..m).map(|_| random_weights(&mut rng, m, -1.0, 1.0)).collect::<Vec<_>>(),
        )?;
        let mu = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, 0.0, 2.0))?;
        let lhs = fam.bullet(&mu)?.flat_norm()?;
        let rhs = fam.sup_norm()? * mu.flat_norm()?;
        t.record(rhs - lhs, 1e-9, || {
            format!("case {case}: ||gamma . mu|| = {lhs} above {rhs}")
        });

        let f = BLFunction::new(space.clone(), random_weights(&mut rng, m, -2.0, 2.0))?;
        let nu = DiscreteMeasure::new(space, random_weights(&mut rng, m, -1.0, 1.0))?;
        let lhs = function_bullet(&f, &nu)?.flat_norm()?;
        let rhs = f.norms().bl * nu.flat_norm()?;
        t.record(rhs - lhs, 1e-9, || {
            format!("case {case}: ||f . mu|| = {lhs} above {rhs}")
        });
    }
    Ok(t.finish())
}

fn positivity(ctx: &mut Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("positivity");
    for _ in 0..ctx.scale.runs {
        let m = rng.gen_range(2..=5);
        let space = random_space(&mut rng, m, 1)?;
        let gamma = MutationKernel::from_columns(space.clone(), &random_stochastic(&mut rng, m))?;
        let rates = random_logistic(&mut rng, m)?;
        // sparse start: some weights exactly zero
        let w: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(0.0..3.0) })
            .collect();
        let u = DiscreteMeasure::new(space, w)?;
        let tr = evolve(&u, &gamma, &rates, 2.0, &EvolveOptions::picard(0.05))?;
        ctx.note_picard(tr.min_weight());
    }
    let mut t = Tally::new("positivity");
    t.cases = ctx.picard_runs;
    t.worst = ctx.min_picard_weight;
    if !(ctx.min_picard_weight >= 0.0) {
        t.failures = 1;
        t.detail = Some(format!("min weight {:e}", ctx.min_picard_weight));
    }
    Ok(t.finish())
}

fn semiflow(ctx: &mut Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("semiflow");
    let mut t = Tally::new("semiflow");
    let dt = 0.05;
    for case in 0..ctx.scale.runs {
        let m = rng.gen_range(2..=4);
        let space = random_space(&mut rng, m, 2)?;
        let gamma = MutationKernel::from_columns(space.clone(), &random_stochastic(&mut rng, m))?;
        let rates = random_logistic(&mut rng, m)?;
        let u = DiscreteMeasure::new(space, random_weights(&mut rng, m, 0.0, 2.0))?;
        let opts = EvolveOptions::picard(dt);
        let (ks, kt) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let (s, tt) = (ks as f64 * dt, kt as f64 * dt);

        let zero = evolve(&u, &gamma, &rates, 0.0, &opts)?;
        let ident = zero.last().weights() == u.weights();
        t.record(if ident { 0.0 } else { -1.0 }, 0.0, || {
            format!("case {case}: Phi(0) is not the identity")
        });

        let whole = evolve(&u, &gamma, &rates, s + tt, &opts)?;
        let first = evolve(&u, &gamma, &rates, s, &opts)?;
        let second = evolve(first.last(), &gamma, &rates, tt, &opts)?;
        ctx.note_picard(whole.min_weight().min(second.min_weight()));
        let d = flat_distance(whole.last(), second.last())?;
        let bound = 10.0 * opts.picard.tol;
        t.record(bound - d, 0.0, || {
            format!("case {case}: t = {tt}, s = {s}: distance {d:e}")
        });
    }
    Ok(t.finish())
}

/// Ratio spread `max / min` of output distance over input distance across
/// perturbation sizes 1e-1, 1e-2, 1e-3, on one seeded instance per run.
fn lipschitz_dependence(ctx: &mut Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("lipschitz_dependence");
    let mut t = Tally::new("lipschitz_dependence");
    let runs = (ctx.scale.runs / 4).max(1);
    for case in 0..runs {
        let m = 3;
        let space = random_space(&mut rng, m, 1)?;
        let a = random_stochastic(&mut rng, m);
        let b = random_stochastic(&mut rng, m);
        let gamma = MutationKernel::from_columns(space.clone(), &a)?;
        let rates = random_logistic(&mut rng, m)?;
        let u = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, 0.5, 2.0))?;
        let v = DiscreteMeasure::new(space.clone(), random_weights(&mut rng, m, 0.0, 1.0))?;
        let opts = EvolveOptions::picard(0.01).with_tol(1e-12);
        let base = evolve(&u, &gamma, &rates, 1.0, &opts)?;
        let mut ratios = Vec::new();
        for eps in [1e-1, 1e-2, 1e-3] {
            let mixed: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| (1.0 - eps) * a[i][j] + eps * b[i][j]).collect())
                .collect();
            let gamma2 = MutationKernel::from_columns(space.clone(), &mixed)?;
            let u2 = u.combine(1.0, &v, eps)?;
            let pert = evolve(&u2, &gamma2, &rates, 1.0, &opts)?;
            ctx.note_picard(pert.min_weight());
            let input = flat_distance(&u, &u2)? + kernel_sup_norm_dist(&gamma, &gamma2)?;
            ratios.push(flat_distance(base.last(), pert.last())? / input);
        }
        ctx.note_picard(base.min_weight());
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = hi / lo;
        t.record(3.0 - spread, 0.0, || {
            format!("case {case}: ratios {ratios:?} spread {spread}")
        });
    }
    Ok(t.finish())
}

fn dissipativity(ctx: &mut Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("dissipativity");
    let mut t = Tally::new("dissipativity");
    let runs = (ctx.scale.runs / 4).max(1);
    for case in 0..runs {
        let m = 2;
        let space = random_space(&mut rng, m, 1)?;
        let (q1, q2) = if case == 0 {
            (vec![2.0, 3.0], vec![1.0, 1.0])
        } else {
            (
                random_weights(&mut rng, m, 2.0, 4.0),
                random_weights(&mut rng, m, 0.5, 1.5),
            )
        };
        let rates = VitalRates::logistic_a2(q1, q2, 1.0)?;
        let gamma = MutationKernel::from_columns(space.clone(), &random_stochastic(&mut rng, m))?;
        let prof = profile(&rates, &space, &ProfileOptions::default())?;
        let kd = prof.k_diamond.expect("all strategies viable");
        let rates = rates.truncate(prof.default_truncation().expect("defined").max(3.0 * kd))?;
        let u = DiscreteMeasure::new(space, vec![1.5 * kd, 1.5 * kd])?;
        let horizon = 20.0 / rates.varpi();
        let horizon = (horizon / 0.01).round() * 0.01;
        let tr = evolve(&u, &gamma, &rates, horizon, &EvolveOptions::picard(0.01))?;
        ctx.note_picard(tr.min_weight());
        let rep = dissipativity_check(&tr, &prof, 0.75 * horizon, 0.01, 1e-6)?;
        let margin = (kd + 0.01 - rep.sup_mass_after_burn_in)
            .min(1e-6 - rep.max_growth_above_bound.max(0.0));
        t.record(margin, 0.0, || format!("case {case}: {rep:?}"));
    }
    Ok(t.finish())
}

fn integrator_crosscheck(ctx: &mut Ctx) -> Result<CheckResult> {
    let mut t = Tally::new("integrator_crosscheck");
    let space = Arc::new(StrategySpace::build_grid(&[0.0], &[1.0], &[2])?);
    let rates = VitalRates::logistic_a2(vec![2.0, 3.0], vec![1.0, 1.0], 1.0)?;
    let gamma =
        MutationKernel::from_columns(space.clone(), &[vec![0.9, 0.1], vec![0.1, 0.9]])?;
    let u = DiscreteMeasure::new(space, vec![0.5, 0.5])?;
    let a = evolve(&u, &gamma, &rates, 1.0, &EvolveOptions::picard(1e-3))?;
    let b = evolve(&u, &gamma, &rates, 1.0, &EvolveOptions::rk4(1e-3))?;
    ctx.note_picard(a.min_weight());
    let d = flat_distance(a.last(), b.last())?;
    t.record(1e-4 - d, 0.0, || format!("picard vs rk4 distance {d:e}"));
    Ok(t.finish())
}

/// Applies the integral representation, written parent-first in measure
/// coordinates, to the iterate a Picard step last swept, and compares with
/// the step's output nodes.
fn measure_form(ctx: &Ctx) -> Result<CheckResult> {
    let mut rng = ctx.rng("measure_form");
    let mut t = Tally::new("measure_form");
    for case in 0..ctx.scale.runs {
        let m = 3;
        let space = random_space(&mut rng, m, 2)?;
        let gamma = MutationKernel::from_columns(space.clone(), &random_stochastic(&mut rng, m))?;
        let rates = random_logistic(&mut rng, m)?.truncate(10.0)?;
        let u = DiscreteMeasure::new(space, random_weights(&mut rng, m, 0.0, 2.0))?;
        let dt = rng.gen_range(0.01..0.2);
        let step = picard_step_detailed(
            &GameState::new(u.clone(), 0.0),
            &gamma,
            &rates,
            dt,
            &PicardOptions::default(),
        )?;
        let expect = integral_representation(u.weights(), &step.input_nodes, dt, &gamma, &rates);
        let err = expect
            .iter()
            .zip(&step.nodes)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        t.record(-err, 1e-12, || format!("case {case}: max deviation {err:e}"));
    }
    Ok(t.finish())
}

/// `(T zeta)(t_k)[e_i]` on the sub-grid of `zeta`, trapezoidal in time.
pub(crate) fn integral_representation(
    u: &[f64],
    zeta: &[Vec<f64>],
    dt: f64,
    gamma: &MutationKernel,
    rates: &VitalRates,
) -> Vec<Vec<f64>> {
    let m = u.len();
    let n = zeta.len();
    let h = dt / (n - 1) as f64;
    let mass: Vec<f64> = zeta.iter().map(|z| z.iter().sum()).collect();
    // int_{t_a}^{t_b} D(zeta(tau)(1), q_i) dtau
    let survive = |a: usize, b: usize, i: usize| -> f64 {
        let mut acc = 0.0;
        for k in a..b {
            acc += 0.5 * h * (rates.death(mass[k], i) + rates.death(mass[k + 1], i));
        }
        (-acc).exp()
    };
    let mut out = vec![vec![0.0; m]; n];
    for k in 0..n {
        for i in 0..m {
            let mut v = u[i] * survive(0, k, i);
            for s in 0..=k {
                if k == 0 {
                    break;
                }
                let w = if s == 0 || s == k { 0.5 * h } else { h };
                let decay = survive(s, k, i);
                for j in 0..m {
                    v += w * zeta[s][j] * rates.birth(mass[s], j) * gamma.entry(i, j) * decay;
                }
            }
            out[k][i] = v;
        }
    }
    out
}
