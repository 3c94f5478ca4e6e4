//! Reproduction numbers, carrying capacities and eventual-boundedness
//! diagnostics.
//!
//! `R(s, q) = B(s, q) / D(s, q)`; `K(q)` solves `R(K(q), q) = 1`. Under the
//! monotonicity assumptions every solution's total mass is eventually below
//! `K_max = max_q K(q)`, and the mass cannot grow while it is above `K_max`.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::rates::{RateFamily, VitalRates};
use crate::space::StrategySpace;

pub const DEFAULT_BISECTION_TOL: f64 = 1e-12;

pub fn reproduction_number(rates: &VitalRates, s: f64, i: usize) -> Result<f64> {
    let d = rates.death(s, i);
    if d == 0.0 {
        return Err(Error::DivisionDomain { mass: s, index: i });
    }
    Ok(rates.birth(s, i) / d)
}

/// `R(0, q_i)`; infinite for the mortality-free logistic family.
pub fn basic_reproduction_number(rates: &VitalRates, i: usize) -> f64 {
    match reproduction_number(rates, 0.0, i) {
        Ok(r) => r,
        Err(_) if rates.birth(0.0, i) > 0.0 => f64::INFINITY,
        Err(_) => 0.0,
    }
}

/// Default bisection bracket `10 max_i B(0, i) / varpi`.
pub fn default_bracket(rates: &VitalRates) -> f64 {
    let bmax = (0..rates.len())
        .map(|i| rates.birth(0.0, i))
        .fold(0.0, f64::max);
    10.0 * bmax / rates.varpi()
}

/// Root of `R(s, q_i) = 1` on `[0, s_max]` by bisection.
///
/// Returns `None` when `R0 < 1`, `Some(0)` when `R0 = 1` within `tol`. The
/// mortality-free logistic family is solved in closed form, `K = q1 / q2`.
pub fn carrying_capacity(
    rates: &VitalRates,
    i: usize,
    s_max: f64,
    tol: f64,
) -> Result<Option<f64>> {
    if let RateFamily::LogisticPaper { q1, q2 } = rates.family() {
        if rates.truncation().is_none() {
            return Ok(Some(q1[i] / q2[i]));
        }
    }
    let r0 = basic_reproduction_number(rates, i);
    if (r0 - 1.0).abs() <= tol {
        return Ok(Some(0.0));
    }
    if r0 < 1.0 {
        return Ok(None);
    }
    let excess = |s: f64| -> Result<f64> {
        let d = rates.death(s, i);
        if d == 0.0 {
            // only possible at s = 0 for the families here; R is +inf there
            return Ok(f64::INFINITY);
        }
        Ok(rates.birth(s, i) / d - 1.0)
    };
    if !(s_max > 0.0) || excess(s_max)? > 0.0 {
        return Err(Error::Bracket { index: i, s_max });
    }
    let (mut lo, mut hi) = (0.0, s_max);
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticProfile {
    pub r0: Vec<f64>,
    pub k: Vec<Option<f64>>,
    /// `None` when no strategy has a carrying capacity.
    pub k_diamond: Option<f64>,
    pub k_min: Option<f64>,
}

impl AsymptoticProfile {
    /// Strategy with the largest carrying capacity (lowest index on ties).
    pub fn fittest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, k) in self.k.iter().enumerate() {
            if let Some(k) = *k {
                if best.is_none_or(|(_, b)| k > b) {
                    best = Some((i, k));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Truncation level that never binds on the attractor: `ceil(K_max) + 1`.
    pub fn default_truncation(&self) -> Option<f64> {
        self.k_diamond.map(|k| k.ceil() + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileOptions {
    /// `None` uses [`default_bracket`].
    pub s_max: Option<f64>,
    pub tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            s_max: None,
            tol: DEFAULT_BISECTION_TOL,
        }
    }
}

pub fn profile(
    rates: &VitalRates,
    space: &StrategySpace,
    opts: &ProfileOptions,
) -> Result<AsymptoticProfile> {
    if rates.len() != space.len() {
        return Err(Error::Dimension {
            expected: space.len(),
            got: rates.len(),
        });
    }
    let s_max = opts.s_max.unwrap_or_else(|| default_bracket(rates));
    let m = rates.len();
    let r0: Vec<f64> = (0..m).map(|i| basic_reproduction_number(rates, i)).collect();
    let k = (0..m)
        .map(|i| carrying_capacity(rates, i, s_max, opts.tol))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = k.iter().flatten().copied().collect();
    let k_diamond = defined.iter().copied().reduce(f64::max);
    let k_min = defined.iter().copied().reduce(f64::min);
    Ok(AsymptoticProfile {
        r0,
        k,
        k_diamond,
        k_min,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DissipativityReport {
    pub applicable: bool,
    pub k_diamond: f64,
    /// Supremum of total mass over samples at or after the burn-in.
    pub sup_mass_after_burn_in: f64,
    pub bounded: bool,
    /// Largest forward-difference mass derivative over samples with mass
    /// above `k_diamond` (`-inf` if there are none).
    pub max_growth_above_bound: f64,
    pub monotone_above_bound: bool,
    /// Time of the first sample where the mass grew while above the bound.
    pub first_growth_violation: Option<f64>,
}

impl DissipativityReport {
    pub fn passed(&self) -> bool {
        self.applicable && self.bounded && self.monotone_above_bound
    }
}

/// Checks the eventual bound `mass <= K_max + slack` after `burn_in` and
/// that the mass derivative is at most `growth_tol` while mass exceeds
/// `K_max`.
pub fn dissipativity_check(
    traj: &Trajectory,
    profile: &AsymptoticProfile,
    burn_in: f64,
    slack: f64,
    growth_tol: f64,
) -> Result<DissipativityReport> {
    let Some(kd) = profile.k_diamond else {
        return Ok(DissipativityReport {
            applicable: false,
            k_diamond: f64::NAN,
            sup_mass_after_burn_in: f64::NAN,
            bounded: false,
            max_growth_above_bound: f64::NAN,
            monotone_above_bound: false,
            first_growth_violation: None,
        });
    };
    if traj.end_time() < burn_in {
        return Err(Error::Config(format!(
            "trajectory ends at {} before burn-in {burn_in}",
            traj.end_time()
        )));
    }
    let masses = traj.masses();
    let sup = traj
        .times
        .iter()
        .zip(&masses)
        .filter(|(t, _)| **t >= burn_in)
        .map(|(_, m)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut max_growth = f64::NEG_INFINITY;
    let mut violation = None;
    for k in 0..masses.len().saturating_sub(1) {
        if masses[k] > kd {
            let rate = (masses[k + 1] - masses[k]) / (traj.times[k + 1] - traj.times[k]);
            max_growth = max_growth.max(rate);
            if rate > growth_tol && violation.is_none() {
                violation = Some(traj.times[k]);
            }
        }
    }
    Ok(DissipativityReport {
        applicable: true,
        k_diamond: kd,
        sup_mass_after_burn_in: sup,
        bounded: sup <= kd + slack,
        max_growth_above_bound: max_growth,
        monotone_above_bound: violation.is_none(),
        first_growth_violation: violation,
    })
}
