//! Density-dependent birth and death rates `B(X, q_i)`, `D(X, q_i)`.
//!
//! Compliance with the monotonicity assumptions (birth nonincreasing and
//! death nondecreasing in the total population `X`, with a positive
//! mortality floor) is carried as metadata and can be checked by sampling
//! with [`VitalRates::check_assumptions`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type RateFn = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RateFamily {
    /// `B = q1`, `D = q2 X`. No mortality floor.
    LogisticPaper { q1: Vec<f64>, q2: Vec<f64> },
    /// `B = q1`, `D = w0 + q2 X`.
    LogisticA2 { q1: Vec<f64>, q2: Vec<f64>, w0: f64 },
    /// `B = b exp(-c X)`, `D = w0 + d1 X`.
    Ricker {
        b: Vec<f64>,
        c: Vec<f64>,
        w0: f64,
        d1: Vec<f64>,
    },
    /// `B = b / (1 + c X)`, `D = w0 + d1 X`.
    BevertonHolt {
        b: Vec<f64>,
        c: Vec<f64>,
        w0: f64,
        d1: Vec<f64>,
    },
    Custom {
        strategies: usize,
        birth: RateFn,
        death: RateFn,
    },
}

impl fmt::Debug for RateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LogisticPaper { q1, q2 } => f
                .debug_struct("LogisticPaper")
                .field("q1", q1)
                .field("q2", q2)
                .finish(),
            Self::LogisticA2 { q1, q2, w0 } => f
                .debug_struct("LogisticA2")
                .field("q1", q1)
                .field("q2", q2)
                .field("w0", w0)
                .finish(),
            Self::Ricker { b, c, w0, d1 } => f
                .debug_struct("Ricker")
                .field("b", b)
                .field("c", c)
                .field("w0", w0)
                .field("d1", d1)
                .finish(),
            Self::BevertonHolt { b, c, w0, d1 } => f
                .debug_struct("BevertonHolt")
                .field("b", b)
                .field("c", c)
                .field("w0", w0)
                .field("d1", d1)
                .finish(),
            Self::Custom { strategies, .. } => f
                .debug_struct("Custom")
                .field("strategies", strategies)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VitalRates {
    family: RateFamily,
    truncation: Option<f64>,
    /// Declared (not verified) compliance with birth-nonincreasing.
    pub a1_compliant: bool,
    /// Declared compliance with death-nondecreasing plus a positive floor.
    pub a2_compliant: bool,
}

/// A sampled monotonicity violation: `rate(x_hi) - rate(x_lo)` has the wrong sign.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityWitness {
    pub strategy: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub value_lo: f64,
    pub value_hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// First place where birth increases, if any.
    pub birth_increase: Option<MonotonicityWitness>,
    /// First place where death decreases, if any.
    pub death_decrease: Option<MonotonicityWitness>,
    /// `min_i D(0, i)`.
    pub varpi: f64,
}

impl AssumptionReport {
    pub fn a1_holds(&self) -> bool {
        self.birth_increase.is_none()
    }

    pub fn a2_holds(&self) -> bool {
        self.death_decrease.is_none() && self.varpi > 0.0
    }
}

fn check_params(name: &str, v: &[f64], strict: bool) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        let ok = x.is_finite() && if strict { x > 0.0 } else { x >= 0.0 };
        if !ok {
            let rel = if strict { "> 0" } else { ">= 0" };
            return Err(Error::Config(format!("{name}[{i}] = {x}, must be {rel}")));
        }
    }
    Ok(())
}

fn check_lens(m: usize, named: &[(&str, usize)]) -> Result<()> {
    for &(name, len) in named {
        if len != m {
            return Err(Error::Config(format!(
                "parameter {name} has length {len}, expected {m}"
            )));
        }
    }
    if m == 0 {
        return Err(Error::Config("rate parameters are empty".into()));
    }
    Ok(())
}

impl VitalRates {
    /// `B(X, q) = q1`, `D(X, q) = q2 X`: generalized logistic growth. Flagged
    /// as violating the mortality floor because `D(0, q) = 0`.
    pub fn logistic_paper(q1: Vec<f64>, q2: Vec<f64>) -> Result<Self> {
        check_lens(q1.len(), &[("q2", q2.len())])?;
        check_params("q1", &q1, true)?;
        check_params("q2", &q2, true)?;
        Ok(Self {
            family: RateFamily::LogisticPaper { q1, q2 },
            truncation: None,
            a1_compliant: true,
            a2_compliant: false,
        })
    }

    pub fn logistic_a2(q1: Vec<f64>, q2: Vec<f64>, w0: f64) -> Result<Self> {
        check_lens(q1.len(), &[("q2", q2.len())])?;
        check_params("q1", &q1, true)?;
        check_params("q2", &q2, true)?;
        check_params("w0", &[w0], true)?;
        Ok(Self {
            family: RateFamily::LogisticA2 { q1, q2, w0 },
            truncation: None,
            a1_compliant: true,
            a2_compliant: true,
        })
    }

    pub fn ricker(b: Vec<f64>, c: Vec<f64>, w0: f64, d1: Vec<f64>) -> Result<Self> {
        check_lens(b.len(), &[("c", c.len()), ("d1", d1.len())])?;
        check_params("b", &b, true)?;
        check_params("c", &c, true)?;
        check_params("w0", &[w0], true)?;
        check_params("d1", &d1, false)?;
        Ok(Self {
            family: RateFamily::Ricker { b, c, w0, d1 },
            truncation: None,
            a1_compliant: true,
            a2_compliant: true,
        })
    }

    pub fn beverton_holt(b: Vec<f64>, c: Vec<f64>, w0: f64, d1: Vec<f64>) -> Result<Self> {
        check_lens(b.len(), &[("c", c.len()), ("d1", d1.len())])?;
        check_params("b", &b, true)?;
        check_params("c", &c, true)?;
        check_params("w0", &[w0], true)?;
        check_params("d1", &d1, false)?;
        Ok(Self {
            family: RateFamily::BevertonHolt { b, c, w0, d1 },
            truncation: None,
            a1_compliant: true,
            a2_compliant: true,
        })
    }

    /// User-supplied closures; compliance flags are whatever the caller declares.
    pub fn custom(
        strategies: usize,
        birth: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
        death: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
        a1_compliant: bool,
        a2_compliant: bool,
    ) -> Self {
        Self {
            family: RateFamily::Custom {
                strategies,
                birth: Arc::new(birth),
                death: Arc::new(death),
            },
            truncation: None,
            a1_compliant,
            a2_compliant,
        }
    }

    /// Clamp the mass argument to `[0, n]` in both rates.
    pub fn truncate(&self, n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Config(format!("truncation level must be positive, got {n}")));
        }
        let mut out = self.clone();
        out.truncation = Some(n);
        Ok(out)
    }

    pub fn untruncated(&self) -> Self {
        let mut out = self.clone();
        out.truncation = None;
        out
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub fn family(&self) -> &RateFamily {
        &self.family
    }

    pub fn family_tag(&self) -> &'static str {
        match self.family {
            RateFamily::LogisticPaper { .. } => "logistic_paper",
            RateFamily::LogisticA2 { .. } => "logistic_a2",
            RateFamily::Ricker { .. } => "ricker",
            RateFamily::BevertonHolt { .. } => "beverton_holt",
            RateFamily::Custom { .. } => "custom",
        }
    }

    pub fn len(&self) -> usize {
        match &self.family {
            RateFamily::LogisticPaper { q1, .. } | RateFamily::LogisticA2 { q1, .. } => q1.len(),
            RateFamily::Ricker { b, .. } | RateFamily::BevertonHolt { b, .. } => b.len(),
            RateFamily::Custom { strategies, .. } => *strategies,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn effective_mass(&self, x: f64) -> f64 {
        match self.truncation {
            Some(n) => x.clamp(0.0, n),
            None => x,
        }
    }

    #[inline]
    pub fn birth(&self, x: f64, i: usize) -> f64 {
        let x = self.effective_mass(x);
        match &self.family {
            RateFamily::LogisticPaper { q1, .. } | RateFamily::LogisticA2 { q1, .. } => q1[i],
            RateFamily::Ricker { b, c, .. } => b[i] * (-c[i] * x).exp(),
            RateFamily::BevertonHolt { b, c, .. } => b[i] / (1.0 + c[i] * x),
            RateFamily::Custom { birth, .. } => birth(x, i),
        }
    }

    #[inline]
    pub fn death(&self, x: f64, i: usize) -> f64 {
        let x = self.effective_mass(x);
        match &self.family {
            RateFamily::LogisticPaper { q2, .. } => q2[i] * x,
            RateFamily::LogisticA2 { q2, w0, .. } => w0 + q2[i] * x,
            RateFamily::Ricker { w0, d1, .. } | RateFamily::BevertonHolt { w0, d1, .. } => {
                w0 + d1[i] * x
            }
            RateFamily::Custom { death, .. } => death(x, i),
        }
    }

    /// `min_i D(0, i)`.
    pub fn varpi(&self) -> f64 {
        (0..self.len())
            .map(|i| self.death(0.0, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Default sampling grid: 200 points on `[0, 2 n]`.
    pub fn default_grid(n: f64) -> Vec<f64> {
        let k = 200;
        (0..k).map(|j| 2.0 * n * j as f64 / (k - 1) as f64).collect()
    }

    /// Samples monotonicity of both rates on `x_grid` for every strategy.
    pub fn check_assumptions(&self, x_grid: &[f64]) -> AssumptionReport {
        let mut grid = x_grid.to_vec();
        grid.sort_by(f64::total_cmp);
        let witness = |rate: &dyn Fn(f64, usize) -> f64, bad: &dyn Fn(f64, f64) -> bool| {
            for i in 0..self.len() {
                for pair in grid.windows(2) {
                    let (lo, hi) = (rate(pair[0], i), rate(pair[1], i));
                    if bad(lo, hi) {
                        return Some(MonotonicityWitness {
                            strategy: i,
                            x_lo: pair[0],
                            x_hi: pair[1],
                            value_lo: lo,
                            value_hi: hi,
                        });
                    }
                }
            }
            None
        };
        AssumptionReport {
            birth_increase: witness(&|x, i| self.birth(x, i), &|lo, hi| hi > lo),
            death_decrease: witness(&|x, i| self.death(x, i), &|lo, hi| hi < lo),
            varpi: self.varpi(),
        }
    }

    /// Largest finite-difference slopes in `X` of birth and death over
    /// `[0, n]`, sampled at `samples` evenly spaced masses.
    pub fn mass_lipschitz(&self, n: f64, samples: usize) -> (f64, f64) {
        let samples = samples.max(2);
        let xs: Vec<f64> = (0..samples)
            .map(|k| n * k as f64 / (samples - 1) as f64)
            .collect();
        let mut lb = 0.0f64;
        let mut ld = 0.0f64;
        for i in 0..self.len() {
            for w in xs.windows(2) {
                let h = w[1] - w[0];
                lb = lb.max((self.birth(w[1], i) - self.birth(w[0], i)).abs() / h);
                ld = ld.max((self.death(w[1], i) - self.death(w[0], i)).abs() / h);
            }
        }
        (lb, ld)
    }
}
