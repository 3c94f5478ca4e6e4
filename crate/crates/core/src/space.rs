//! Finite metric spaces standing in for a compact strategy space.
//!
//! Every vector or matrix elsewhere in the crate is indexed in the point
//! order fixed here. For lattices that order is lexicographic over the
//! lattice multi-index, first axis slowest.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed in the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-12;

/// Spaces larger than this may opt out of the O(m^3) metric validation.
pub const VALIDATION_OPT_OUT_SIZE: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpace {
    points: Vec<Vec<f64>>,
    /// Row-major m x m.
    dist: Vec<f64>,
    quad_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Row-major or nested pairwise distances supplied by the caller.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c.name == name && !c.passed)
    }

    pub fn first_failure(&self) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match (&c.passed, &c.counterexample) {
                (true, _) => writeln!(f, "{:<16} pass", c.name)?,
                (false, Some(w)) => writeln!(f, "{:<16} FAIL  {w}", c.name)?,
                (false, None) => writeln!(f, "{:<16} FAIL", c.name)?,
            }
        }
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl StrategySpace {
    /// Regular rectangular lattice with `counts[k]` points along axis `k`,
    /// spanning `[lo[k], hi[k]]` (a single point sits at `lo[k]`).
    pub fn build_grid(lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::Config("grid needs at least one axis".into()));
        }
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::Config(format!(
                "grid dimension mismatch: lo has {}, hi has {}, counts has {}",
                lo.len(),
                hi.len(),
                counts.len()
            )));
        }
        for k in 0..lo.len() {
            if !(lo[k] < hi[k]) {
                return Err(Error::Config(format!(
                    "grid axis {k}: lo ({}) must be < hi ({})",
                    lo[k], hi[k]
                )));
            }
            if counts[k] == 0 {
                return Err(Error::Config(format!("grid axis {k}: count must be >= 1")));
            }
        }

        let axes: Vec<Vec<f64>> = (0..lo.len())
            .map(|k| {
                let n = counts[k];
                if n == 1 {
                    vec![lo[k]]
                } else {
                    let h = (hi[k] - lo[k]) / (n - 1) as f64;
                    (0..n)
                        .map(|j| if j == n - 1 { hi[k] } else { lo[k] + j as f64 * h })
                        .collect()
                }
            })
            .collect();

        let m: usize = counts.iter().product();
        let mut points = Vec::with_capacity(m);
        let mut idx = vec![0usize; lo.len()];
        for _ in 0..m {
            points.push(idx.iter().enumerate().map(|(k, &j)| axes[k][j]).collect());
            // odometer, last axis fastest
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }

        let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let quad = vec![volume / m as f64; m];
        let space = Self::from_parts(points, Metric::Euclidean, Some(quad))?;
        Ok(space)
    }

    /// Arbitrary point set with either the Euclidean metric or an explicit
    /// distance matrix. Invalid metrics are rejected, never repaired.
    pub fn build_explicit(points: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        let space = Self::from_parts(points, metric, None)?;
        space.ensure_valid()?;
        Ok(space)
    }

    /// Like [`build_explicit`](Self::build_explicit) with caller-supplied
    /// quadrature weights. `validate = false` is honored only above
    /// [`VALIDATION_OPT_OUT_SIZE`] points.
    pub fn build_with(
        points: Vec<Vec<f64>>,
        metric: Metric,
        quad_weights: Option<Vec<f64>>,
        validate: bool,
    ) -> Result<Self> {
        let space = Self::from_parts(points, metric, quad_weights)?;
        if validate || space.len() <= VALIDATION_OPT_OUT_SIZE {
            space.ensure_valid()?;
        }
        Ok(space)
    }

    fn from_parts(
        points: Vec<Vec<f64>>,
        metric: Metric,
        quad_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = points.len();
        if m == 0 {
            return Err(Error::Config("strategy space needs at least one point".into()));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::Config("strategy points need at least one coordinate".into()));
        }
        if let Some(bad) = points.iter().position(|p| p.len() != n) {
            return Err(Error::Config(format!(
                "point {bad} has {} coordinates, expected {n}",
                points[bad].len()
            )));
        }
        let dist = match metric {
            Metric::Euclidean => {
                let mut d = vec![0.0; m * m];
                for i in 0..m {
                    for j in (i + 1)..m {
                        let v = euclid(&points[i], &points[j]);
                        d[i * m + j] = v;
                        d[j * m + i] = v;
                    }
                }
                d
            }
            Metric::Explicit(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::Config(format!(
                        "explicit metric must be {m} x {m} to match the point list"
                    )));
                }
                rows.into_iter().flatten().collect()
            }
        };
        let quad_weights = match quad_weights {
            Some(w) => {
                if w.len() != m {
                    return Err(Error::Config(format!(
                        "quad_weights has {} entries, expected {m}",
                        w.len()
                    )));
                }
                w
            }
            None => vec![1.0 / m as f64; m],
        };
        Ok(Self {
            points,
            dist,
            quad_weights,
        })
    }

    fn ensure_valid(&self) -> Result<()> {
        let report = self.validate_metric();
        match report.first_failure() {
            None => Ok(()),
            Some(c) => Err(Error::Metric(format!(
                "{}: {}",
                c.name,
                c.counterexample.as_deref().unwrap_or("violated")
            ))),
        }
    }

    /// Checks every metric-space invariant and reports the first
    /// counterexample for each.
    pub fn validate_metric(&self) -> ValidationReport {
        let m = self.len();
        let d = |i: usize, j: usize| self.dist[i * m + j];
        let mut checks = Vec::new();
        let mut push = |name, witness: Option<String>| {
            checks.push(InvariantCheck {
                name,
                passed: witness.is_none(),
                counterexample: witness,
            })
        };

        let pairs = || (0..m).flat_map(move |i| (0..m).map(move |j| (i, j)));

        push(
            "finite",
            pairs()
                .find(|&(i, j)| !d(i, j).is_finite())
                .map(|(i, j)| format!("d({i},{j}) = {}", d(i, j))),
        );
        push(
            "nonnegativity",
            pairs()
                .find(|&(i, j)| d(i, j) < 0.0)
                .map(|(i, j)| format!("d({i},{j}) = {}", d(i, j))),
        );
        push(
            "zero_diagonal",
            (0..m)
                .find(|&i| d(i, i) != 0.0)
                .map(|i| format!("d({i},{i}) = {}", d(i, i))),
        );
        push(
            "symmetry",
            pairs()
                .find(|&(i, j)| d(i, j) != d(j, i))
                .map(|(i, j)| format!("d({i},{j}) = {} but d({j},{i}) = {}", d(i, j), d(j, i))),
        );
        push(
            "distinct_points",
            pairs()
                .find(|&(i, j)| i != j && !(d(i, j) > 0.0))
                .map(|(i, j)| format!("d({i},{j}) = {}", d(i, j))),
        );

        let mut triangle = None;
        'outer: for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if d(i, k) > d(i, j) + d(j, k) + TRIANGLE_TOL {
                        triangle = Some(format!(
                            "({i}, {j}, {k}): d({i},{k}) = {} > d({i},{j}) + d({j},{k}) = {}",
                            d(i, k),
                            d(i, j) + d(j, k)
                        ));
                        break 'outer;
                    }
                }
            }
        }
        push("triangle", triangle);

        let total: f64 = self.quad_weights.iter().sum();
        push(
            "quad_weights",
            match self.quad_weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
                Some(i) => Some(format!("quad_weights[{i}] = {}", self.quad_weights[i])),
                None if !(total > 0.0) => Some(format!("total = {total}")),
                None => None,
            },
        );

        ValidationReport { checks }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinate dimension of the strategy descriptors.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn dist_matrix(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.len()).map(<[f64]>::to_vec).collect()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Restriction to a subset of points, keeping the induced metric.
    pub fn subspace(&self, indices: &[usize]) -> Self {
        let m = self.len();
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let dist = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.dist[i * m + j])
            .collect();
        let quad_weights = indices.iter().map(|&i| self.quad_weights[i]).collect();
        Self {
            points,
            dist,
            quad_weights,
        }
    }

    /// Construct without any validation; used to exercise failure reporting.
    #[doc(hidden)]
    pub fn unchecked(points: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> Self {
        let m = points.len();
        Self {
            points,
            dist: dist.into_iter().flatten().collect(),
            quad_weights: vec![1.0 / m as f64; m],
        }
    }
}
