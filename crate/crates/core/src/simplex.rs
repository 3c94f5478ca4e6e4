//! Dense tableau simplex for small linear programs.
//!
//! Problems are taken in equality standard form
//!
//! ```text
//! minimize c^T x   subject to  A x = b,  x >= 0
//! ```
//!
//! together with a caller-supplied primal feasible basis, which is all the
//! flat-norm LP needs. [`maximize_leq`] covers the `A x <= b, b >= 0` case by
//! adding slacks and starting from the slack basis.
//!
//! Pivoting uses Dantzig's rule and falls back to Bland's rule after a run of
//! degenerate pivots, so the method terminates on degenerate problems.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 32;

#[derive(Clone, Debug)]
pub struct StandardLp {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub basis: Vec<usize>,
    pub pivots: usize,
}

impl StandardLp {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
            b: vec![0.0; rows],
            c: vec![0.0; cols],
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, j: usize, v: f64) {
        self.a[r * self.cols + j] = v;
    }

    /// Solve starting from `basis` (one column per row). The basis must be
    /// nonsingular and primal feasible.
    pub fn minimize_from_basis(&self, basis: &[usize]) -> Result<LpSolution> {
        if basis.len() != self.rows {
            return Err(Error::Lp(format!(
                "basis has {} columns for {} rows",
                basis.len(),
                self.rows
            )));
        }
        let mut t = Tableau::new(self);
        t.install_basis(basis)?;
        t.run()?;
        Ok(t.solution())
    }
}

struct Tableau {
    rows: usize,
    /// Row width: cols + 1 (last entry is the rhs).
    width: usize,
    /// `rows` constraint rows followed by the objective row.
    data: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    opt_tol: f64,
    pivots: usize,
}

impl Tableau {
    fn new(lp: &StandardLp) -> Self {
        let width = lp.cols + 1;
        let mut data = vec![0.0; (lp.rows + 1) * width];
        for r in 0..lp.rows {
            data[r * width..r * width + lp.cols]
                .copy_from_slice(&lp.a[r * lp.cols..(r + 1) * lp.cols]);
            data[r * width + lp.cols] = lp.b[r];
        }
        let obj = lp.rows * width;
        data[obj..obj + lp.cols].copy_from_slice(&lp.c);
        let cmax = lp.c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        Self {
            rows: lp.rows,
            width,
            data,
            basis: vec![usize::MAX; lp.rows],
            cols: lp.cols,
            opt_tol: 1e-11 * cmax,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.data[r * self.width + j]
    }

    fn pivot(&mut self, p: usize, e: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(p, e);
        for v in &mut self.data[p * w..(p + 1) * w] {
            *v *= inv;
        }
        let (head, rest) = self.data.split_at_mut(p * w);
        let (prow, tail) = rest.split_at_mut(w);
        for row in head.chunks_mut(w).chain(tail.chunks_mut(w)) {
            let f = row[e];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[e] = 0.0;
            }
        }
        self.basis[p] = e;
        self.pivots += 1;
    }

    fn install_basis(&mut self, basis: &[usize]) -> Result<()> {
        let mut assigned = vec![false; self.rows];
        for &col in basis {
            if col >= self.cols {
                return Err(Error::Lp(format!("basis column {col} out of range")));
            }
            let (p, v) = (0..self.rows)
                .filter(|&r| !assigned[r])
                .map(|r| (r, self.at(r, col).abs()))
                .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if p == usize::MAX || v < PIVOT_EPS {
                return Err(Error::Lp("initial basis is singular".into()));
            }
            self.pivot(p, col);
            assigned[p] = true;
        }
        self.pivots = 0;
        let rhs = self.cols;
        for r in 0..self.rows {
            let v = self.at(r, rhs);
            if v < -1e-9 {
                return Err(Error::Lp(format!("initial basis infeasible in row {r} ({v})")));
            }
        }
        Ok(())
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let obj = self.rows;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            let d = self.at(obj, j);
            if d < -self.opt_tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, e: usize) -> Option<usize> {
        let rhs = self.cols;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, e);
            if a > PIVOT_EPS {
                let ratio = self.at(r, rhs).max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        if ratio < bv - 1e-15
                            || (ratio <= bv + 1e-15 && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
        }
        best.map(|(r, _)| r)
    }

    fn run(&mut self) -> Result<()> {
        let max_pivots = 50 * (self.rows + self.cols) + 1000;
        let mut streak = 0usize;
        loop {
            let Some(e) = self.entering(streak >= DEGENERATE_STREAK) else {
                return Ok(());
            };
            let Some(p) = self.leaving(e) else {
                return Err(Error::Lp(format!("objective unbounded along column {e}")));
            };
            if self.at(p, self.cols) <= 1e-14 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(p, e);
            if self.pivots > max_pivots {
                return Err(Error::Lp(format!("no convergence after {max_pivots} pivots")));
            }
        }
    }

    fn solution(&self) -> LpSolution {
        let mut x = vec![0.0; self.cols];
        for (r, &j) in self.basis.iter().enumerate() {
            x[j] = self.at(r, self.cols).max(0.0);
        }
        LpSolution {
            objective: -self.at(self.rows, self.cols),
            x,
            basis: self.basis.clone(),
            pivots: self.pivots,
        }
    }
}

/// `maximize c^T x` subject to `A x <= b`, `x >= 0`, with `b >= 0` so the
/// slack basis is feasible. `a` is row-major `b.len() x c.len()`.
pub fn maximize_leq(c: &[f64], a: &[f64], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let rows = b.len();
    if a.len() != rows * n {
        return Err(Error::Lp("constraint matrix shape mismatch".into()));
    }
    if let Some(r) = b.iter().position(|&v| v < 0.0) {
        return Err(Error::Lp(format!("rhs {r} is negative; slack basis infeasible")));
    }
    let mut lp = StandardLp::new(rows, n + rows);
    for r in 0..rows {
        for j in 0..n {
            lp.set(r, j, a[r * n + j]);
        }
        lp.set(r, n + r, 1.0);
        lp.b[r] = b[r];
    }
    for j in 0..n {
        lp.c[j] = -c[j];
    }
    let basis: Vec<usize> = (n..n + rows).collect();
    let mut sol = lp.minimize_from_basis(&basis)?;
    sol.objective = -sol.objective;
    sol.x.truncate(n);
    Ok(sol)
}
