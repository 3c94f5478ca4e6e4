//! Brute-force flat norm for measures with small support.
//!
//! Shares nothing with the simplex path. With `L = 1 - s` substituted, the
//! admissible set of `(g, s)` is a bounded polytope in `k + 1` dimensions
//! (`k` = support size), so the maximum of `sum w_i g_i` sits at a vertex.
//! Every vertex is found by solving each `(k+1)`-subset of the constraints
//! as an equality system and keeping the feasible solutions.

use crate::bl::DiscreteMeasure;
use crate::error::{Error, Result};

/// Largest support the enumeration accepts.
pub const MAX_SUPPORT: usize = 3;

const FEAS_TOL: f64 = 1e-12;

/// Exact flat norm by vertex enumeration; support size at most [`MAX_SUPPORT`].
pub fn flat_norm_bruteforce(mu: &DiscreteMeasure) -> Result<f64> {
    let support: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights()[i] != 0.0).collect();
    if support.len() > MAX_SUPPORT {
        return Err(Error::Config(format!(
            "oracle handles at most {MAX_SUPPORT} support points, got {}",
            support.len()
        )));
    }
    let w: Vec<f64> = support.iter().map(|&i| mu.weights()[i]).collect();
    let d: Vec<Vec<f64>> = support
        .iter()
        .map(|&i| support.iter().map(|&j| mu.space().dist(i, j)).collect())
        .collect();
    Ok(vertex_max(&w, &d))
}

/// Maximize `sum w_i g_i` over `|g_i| <= s`, `|g_i - g_j| <= (1 - s) d_ij`,
/// `0 <= s <= 1`.
pub fn vertex_max(w: &[f64], d: &[Vec<f64>]) -> f64 {
    let k = w.len();
    if k == 0 {
        return 0.0;
    }
    let dim = k + 1;
    let s = k;
    // rows of (a, b) meaning a . x <= b
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..k {
        let mut a = vec![0.0; dim];
        a[i] = 1.0;
        a[s] = -1.0;
        cons.push((a, 0.0));
        let mut a = vec![0.0; dim];
        a[i] = -1.0;
        a[s] = -1.0;
        cons.push((a, 0.0));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let mut a = vec![0.0; dim];
                a[i] = 1.0;
                a[j] = -1.0;
                a[s] = d[i][j];
                cons.push((a, d[i][j]));
            }
        }
    }
    let mut a = vec![0.0; dim];
    a[s] = -1.0;
    cons.push((a, 0.0));
    let mut a = vec![0.0; dim];
    a[s] = 1.0;
    cons.push((a, 1.0));

    let mut best = 0.0f64;
    for subset in combinations(cons.len(), dim) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&r| cons[r].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&r| cons[r].1).collect();
        let Some(x) = solve(a, b) else { continue };
        let feasible = cons.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            lhs <= b + FEAS_TOL
        });
        if feasible {
            let v: f64 = w.iter().zip(&x).map(|(p, q)| p * q).sum();
            best = best.max(v);
        }
    }
    best
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..r).rev().find(|&i| idx[i] < i + n - r) else {
            return out;
        };
        idx[i] += 1;
        for j in (i + 1)..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}
