//! The measure-valued vector field and its time integration.
//!
//! With `X = mu(1)` the field is
//!
//! ```text
//! F(mu, gamma) = B(X, .) gamma(.) . mu  -  D(X, .) . mu
//! ```
//!
//! i.e. births are pushed through the mutation kernel and deaths act
//! pointwise. Two steppers are provided:
//!
//! * [`step_picard`] iterates the mild form of the equation on a sub-grid of
//!   the step,
//!
//!   ```text
//!   zeta(t) = exp(-int_0^t D(zeta(1), .)) . u
//!           + int_0^t exp(-int_s^t D(zeta(1), .)) . [B(zeta(s)(1), .) gamma . zeta(s)] ds
//!   ```
//!
//!   to a fixed point. Every term is a nonnegative combination, so positive
//!   data stay positive exactly.
//! * [`step_rk4`] is classical RK4 on the weight vector, used as a cross-check
//!   and for signed data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bl::{flat_norm, BLFunction, DiscreteMeasure, MutationKernel};
use crate::error::{check_dim, Error, Result};
use crate::rates::VitalRates;
use crate::space::StrategySpace;

/// Sub-intervals per Picard step.
pub const PICARD_SUBSTEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Picard,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    /// Convergence threshold on `max_k ||zeta_new(t_k) - zeta_old(t_k)||_1`.
    pub tol: f64,
    pub max_iter: usize,
    pub substeps: usize,
    /// Also confirm convergence in the flat norm with one LP per sub-grid
    /// node after the loop. The l1 distance already dominates the flat
    /// norm, so this only re-checks the bound.
    pub lp_check: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            substeps: PICARD_SUBSTEPS,
            lp_check: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameState {
    pub mu: DiscreteMeasure,
    pub t: f64,
}

impl GameState {
    pub fn new(mu: DiscreteMeasure, t: f64) -> Self {
        Self { mu, t }
    }
}

/// A sampled solution together with the frozen kernel and rates that
/// produced it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteMeasure>,
    pub gamma: MutationKernel,
    pub rates: VitalRates,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &DiscreteMeasure {
        &self.states[0]
    }

    pub fn last(&self) -> &DiscreteMeasure {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn masses(&self) -> Vec<f64> {
        self.states.iter().map(DiscreteMeasure::total_mass).collect()
    }

    pub fn min_weight(&self) -> f64 {
        self.states
            .iter()
            .map(DiscreteMeasure::min_weight)
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the sample at time `t`, if `t` is a sample time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let scale = if self.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            1.0
        };
        let tol = 1e-9 * scale;
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }

    pub fn state_at(&self, t: f64) -> Option<&DiscreteMeasure> {
        self.index_of(t).map(|k| &self.states[k])
    }
}

fn same_space(mu: &DiscreteMeasure, gamma: &MutationKernel, rates: &VitalRates) -> Result<()> {
    check_dim(gamma.space().len(), mu.len())?;
    check_dim(mu.len(), rates.len())?;
    if !(Arc::ptr_eq(mu.space(), gamma.space()) || **mu.space() == **gamma.space()) {
        return Err(Error::Config(
            "measure and kernel live on different strategy spaces".into(),
        ));
    }
    Ok(())
}

/// Field on raw weights; `scratch` and `out` have length m.
#[inline]
fn field_into(
    w: &[f64],
    gamma: &MutationKernel,
    rates: &VitalRates,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let x: f64 = w.iter().sum();
    for (i, s) in scratch.iter_mut().enumerate() {
        *s = rates.birth(x, i) * w[i];
    }
    gamma.family().apply_into(scratch, out);
    for (i, o) in out.iter_mut().enumerate() {
        *o -= rates.death(x, i) * w[i];
    }
}

/// `F(mu, gamma)` with the rates as given (truncated or not).
pub fn vector_field(
    mu: &DiscreteMeasure,
    gamma: &MutationKernel,
    rates: &VitalRates,
) -> Result<DiscreteMeasure> {
    same_space(mu, gamma, rates)?;
    let m = mu.len();
    let mut scratch = vec![0.0; m];
    let mut out = vec![0.0; m];
    field_into(mu.weights(), gamma, rates, &mut scratch, &mut out);
    DiscreteMeasure::new(mu.space().clone(), out)
}

/// `F_N`: the field with both rates clamped to masses in `[0, n]`.
pub fn vector_field_truncated(
    mu: &DiscreteMeasure,
    gamma: &MutationKernel,
    rates: &VitalRates,
    n: f64,
) -> Result<DiscreteMeasure> {
    vector_field(mu, gamma, &rates.truncate(n)?)
}

/// Sup and Lipschitz bounds of a truncated rate over `[0, n] x Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBounds {
    pub sup: f64,
    /// Lipschitz constant in the mass argument.
    pub lip_mass: f64,
    /// Lipschitz constant in the strategy argument, uniform in mass.
    pub lip_strategy: f64,
}

impl RateBounds {
    /// Upper bound for `sup_X ||rate(X, .)||_BL` plus the mass slope.
    pub fn bl(&self) -> f64 {
        self.sup + self.lip_mass + self.lip_strategy
    }
}

fn rate_bounds(
    rate: impl Fn(f64, usize) -> f64,
    space: &StrategySpace,
    n: f64,
    samples: usize,
) -> RateBounds {
    let m = space.len();
    let xs: Vec<f64> = (0..samples)
        .map(|k| n * k as f64 / (samples - 1) as f64)
        .collect();
    let mut b = RateBounds {
        sup: 0.0,
        lip_mass: 0.0,
        lip_strategy: 0.0,
    };
    for &x in &xs {
        let vals: Vec<f64> = (0..m).map(|i| rate(x, i)).collect();
        for i in 0..m {
            b.sup = b.sup.max(vals[i].abs());
            for j in (i + 1)..m {
                b.lip_strategy = b.lip_strategy.max((vals[i] - vals[j]).abs() / space.dist(i, j));
            }
        }
    }
    for i in 0..m {
        for w in xs.windows(2) {
            let s = (rate(w[1], i) - rate(w[0], i)).abs() / (w[1] - w[0]);
            b.lip_mass = b.lip_mass.max(s);
        }
    }
    b
}

/// Constants of the Lipschitz estimate for the truncated field on a ball of
/// positive measures:
///
/// ```text
/// ||F_N(zeta, gamma) - F_N(beta, lambda)|| <= b_gamma ||gamma - lambda||_inf + b_mu ||zeta - beta||
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldLipschitz {
    pub b_gamma: f64,
    pub b_mu: f64,
    pub birth: RateBounds,
    pub death: RateBounds,
}

/// Evaluates the constants for `||zeta|| = zeta_norm` and a kernel with
/// Lipschitz bound `kernel_lip` (so its BL norm is `1 + kernel_lip`).
/// Rate bounds are sampled on `samples` masses in `[0, n]`.
pub fn field_lipschitz(
    rates: &VitalRates,
    space: &StrategySpace,
    n: f64,
    zeta_norm: f64,
    kernel_lip: f64,
    samples: usize,
) -> Result<FieldLipschitz> {
    let r = rates.truncate(n)?;
    let samples = samples.max(2);
    let birth = rate_bounds(|x, i| r.birth(x, i), space, n, samples);
    let death = rate_bounds(|x, i| r.death(x, i), space, n, samples);
    let lambda_bl = 1.0 + kernel_lip;
    let b_mu = birth.lip_mass * zeta_norm
        + birth.bl() * lambda_bl
        + zeta_norm * death.bl()
        + death.bl();
    let b_gamma = birth.sup * zeta_norm;
    Ok(FieldLipschitz {
        b_gamma,
        b_mu,
        birth,
        death,
    })
}

/// The sub-grid history of one Picard step.
#[derive(Clone, Debug)]
pub struct PicardStep {
    pub t0: f64,
    pub dt: f64,
    /// Weights at the `substeps + 1` sub-grid nodes, output of the last sweep.
    pub nodes: Vec<Vec<f64>>,
    /// The iterate the last sweep was applied to.
    pub input_nodes: Vec<Vec<f64>>,
    pub iterations: usize,
    pub change: f64,
}

/// One application of the mild-form map to the sub-grid iterate `zeta`,
/// with trapezoidal quadrature for both time integrals.
fn picard_sweep(
    u: &[f64],
    zeta: &[Vec<f64>],
    h: f64,
    gamma: &MutationKernel,
    rates: &VitalRates,
    out: &mut [Vec<f64>],
) {
    let m = u.len();
    let nodes = zeta.len();
    let mut death = vec![vec![0.0; m]; nodes];
    let mut births = vec![vec![0.0; m]; nodes];
    let mut scratch = vec![0.0; m];
    for k in 0..nodes {
        let x: f64 = zeta[k].iter().sum();
        for i in 0..m {
            death[k][i] = rates.death(x, i);
            scratch[i] = rates.birth(x, i) * zeta[k][i];
        }
        gamma.family().apply_into(&scratch, &mut births[k]);
    }
    // cumulative death integrals from the step start
    let mut cum = vec![vec![0.0; m]; nodes];
    for k in 1..nodes {
        for i in 0..m {
            cum[k][i] = cum[k - 1][i] + 0.5 * h * (death[k - 1][i] + death[k][i]);
        }
    }
    for k in 0..nodes {
        for i in 0..m {
            let mut v = (-cum[k][i]).exp() * u[i];
            if k > 0 {
                for j in 0..=k {
                    let c = if j == 0 || j == k { 0.5 * h } else { h };
                    v += c * (-(cum[k][i] - cum[j][i])).exp() * births[j][i];
                }
            }
            out[k][i] = v;
        }
    }
}

/// Fixed-point iteration of the mild form over `[t, t + dt]`, returning the
/// full sub-grid history.
pub fn picard_step_detailed(
    state: &GameState,
    gamma: &MutationKernel,
    rates: &VitalRates,
    dt: f64,
    opts: &PicardOptions,
) -> Result<PicardStep> {
    same_space(&state.mu, gamma, rates)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !state.mu.is_positive() {
        return Err(Error::Config(
            "the picard scheme needs nonnegative weights; use rk4 for signed data".into(),
        ));
    }
    let u = state.mu.weights();
    let m = u.len();
    let nodes = opts.substeps.max(1) + 1;
    let h = dt / (nodes - 1) as f64;
    let mut zeta = vec![u.to_vec(); nodes];
    let mut next = vec![vec![0.0; m]; nodes];
    let mut change = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        picard_sweep(u, &zeta, h, gamma, rates, &mut next);
        change = zeta
            .iter()
            .zip(&next)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        std::mem::swap(&mut zeta, &mut next);
        if change < opts.tol {
            if opts.lp_check {
                for (a, b) in zeta.iter().zip(&next) {
                    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    let d = flat_norm(&DiscreteMeasure::new(state.mu.space().clone(), diff)?)?;
                    if d >= opts.tol {
                        return Err(Error::StepFailure {
                            t: state.t,
                            iterations: iter,
                            change: d,
                        });
                    }
                }
            }
            return Ok(PicardStep {
                t0: state.t,
                dt,
                nodes: zeta,
                input_nodes: next,
                iterations: iter,
                change,
            });
        }
    }
    Err(Error::StepFailure {
        t: state.t,
        iterations: opts.max_iter,
        change,
    })
}

pub fn step_picard(
    state: &GameState,
    gamma: &MutationKernel,
    rates: &VitalRates,
    dt: f64,
    opts: &PicardOptions,
) -> Result<GameState> {
    let step = picard_step_detailed(state, gamma, rates, dt, opts)?;
    let w = step.nodes.into_iter().last().expect("at least two nodes");
    Ok(GameState {
        mu: DiscreteMeasure::new(state.mu.space().clone(), w)?,
        t: state.t + dt,
    })
}

/// Classical RK4 on the weight vector. No positivity guarantee.
pub fn step_rk4(
    state: &GameState,
    gamma: &MutationKernel,
    rates: &VitalRates,
    dt: f64,
) -> Result<GameState> {
    same_space(&state.mu, gamma, rates)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let w = state.mu.weights();
    let m = w.len();
    let mut scratch = vec![0.0; m];
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];

    field_into(w, gamma, rates, &mut scratch, &mut k1);
    for i in 0..m {
        tmp[i] = w[i] + 0.5 * dt * k1[i];
    }
    field_into(&tmp, gamma, rates, &mut scratch, &mut k2);
    for i in 0..m {
        tmp[i] = w[i] + 0.5 * dt * k2[i];
    }
    field_into(&tmp, gamma, rates, &mut scratch, &mut k3);
    for i in 0..m {
        tmp[i] = w[i] + dt * k3[i];
    }
    field_into(&tmp, gamma, rates, &mut scratch, &mut k4);
    let out = (0..m)
        .map(|i| w[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok(GameState {
        mu: DiscreteMeasure::new(state.mu.space().clone(), out)?,
        t: state.t + dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub scheme: Scheme,
    pub dt: f64,
    pub picard: PicardOptions,
}

impl EvolveOptions {
    pub fn picard(dt: f64) -> Self {
        Self {
            scheme: Scheme::Picard,
            dt,
            picard: PicardOptions::default(),
        }
    }

    pub fn rk4(dt: f64) -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt,
            picard: PicardOptions::default(),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.picard.tol = tol;
        self
    }
}

/// Number of whole steps of size `dt` in `[0, horizon]`; `horizon` must be
/// an integer multiple of `dt`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("horizon must be >= 0, got {horizon}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::Config(format!(
            "horizon {horizon} is not a multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Integrate from `u` over `[0, horizon]`, sampling every step. The
/// kernel coordinate of the semiflow is carried along unchanged.
pub fn evolve(
    u: &DiscreteMeasure,
    gamma: &MutationKernel,
    rates: &VitalRates,
    horizon: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    same_space(u, gamma, rates)?;
    let steps = step_count(horizon, opts.dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(u.clone());
    let mut state = GameState::new(u.clone(), 0.0);
    for k in 1..=steps {
        let next = match opts.scheme {
            Scheme::Picard => step_picard(&state, gamma, rates, opts.dt, &opts.picard)?,
            Scheme::Rk4 => step_rk4(&state, gamma, rates, opts.dt)?,
        };
        // times are multiples of dt, not accumulated sums
        state = GameState::new(next.mu, k as f64 * opts.dt);
        times.push(state.t);
        states.push(state.mu.clone());
    }
    Ok(Trajectory {
        times,
        states,
        gamma: gamma.clone(),
        rates: rates.clone(),
    })
}

/// `|d/dt mu(t)[g] - F(mu(t))[g]|` with the derivative taken by central
/// differences of neighbouring samples.
pub fn constraint_residual(traj: &Trajectory, g: &BLFunction, t: f64) -> Result<f64> {
    let out_of_range = || Error::OutOfRange {
        t,
        lo: traj.times[0],
        hi: traj.end_time(),
    };
    let k = traj.index_of(t).ok_or_else(out_of_range)?;
    if k == 0 || k + 1 >= traj.len() {
        return Err(out_of_range());
    }
    let lhs = (traj.states[k + 1].pair(g)? - traj.states[k - 1].pair(g)?)
        / (traj.times[k + 1] - traj.times[k - 1]);
    let rhs = vector_field(&traj.states[k], &traj.gamma, &traj.rates)?.pair(g)?;
    Ok((lhs - rhs).abs())
}
