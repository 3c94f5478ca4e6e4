//! Bounded Lipschitz functions, their dual (signed measures with the flat
//! norm), measure-valued kernels and the bullet action.
//!
//! Kernel orientation: a [`MeasureFamily`] stores one measure per *source*
//! strategy as a column, so `columns[i][j]` is the mass that the measure
//! attached to parent `q_j` puts on offspring `q_i`. With that layout
//! `gamma . mu` is the plain matrix-vector product `columns * weights`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::simplex::StandardLp;
use crate::space::StrategySpace;

/// Tolerance for column sums and sign checks on kernels.
pub const KERNEL_TOL: f64 = 1e-9;

fn same_space(a: &Arc<StrategySpace>, b: &Arc<StrategySpace>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlNorms {
    pub sup: f64,
    pub lip: f64,
    pub bl: f64,
}

/// A real function on the strategy points.
#[derive(Clone, Debug)]
pub struct BLFunction {
    values: Vec<f64>,
    space: Arc<StrategySpace>,
}

impl BLFunction {
    pub fn new(space: Arc<StrategySpace>, values: Vec<f64>) -> Result<Self> {
        check_dim(space.len(), values.len())?;
        Ok(Self { values, space })
    }

    pub fn constant(space: Arc<StrategySpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        Self { values, space }
    }

    pub fn from_fn(space: Arc<StrategySpace>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = space.points().iter().map(|p| f(p)).collect();
        Self { values, space }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> &Arc<StrategySpace> {
        &self.space
    }

    pub fn norms(&self) -> BlNorms {
        let sup = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = self.values.len();
        let mut lip = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                let r = (self.values[i] - self.values[j]).abs() / self.space.dist(i, j);
                lip = lip.max(r);
            }
        }
        BlNorms {
            sup,
            lip,
            bl: sup + lip,
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &BLFunction) -> Result<BLFunction> {
        same_space(&self.space, &other.space)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self {
            values,
            space: self.space.clone(),
        })
    }
}

/// A signed measure given by its weights on the strategy points.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    space: Arc<StrategySpace>,
}

impl DiscreteMeasure {
    pub fn new(space: Arc<StrategySpace>, weights: Vec<f64>) -> Result<Self> {
        check_dim(space.len(), weights.len())?;
        Ok(Self { weights, space })
    }

    pub fn zeros(space: Arc<StrategySpace>) -> Self {
        let weights = vec![0.0; space.len()];
        Self { weights, space }
    }

    /// `mass * delta_{q_index}`.
    pub fn dirac(space: Arc<StrategySpace>, index: usize, mass: f64) -> Result<Self> {
        if index >= space.len() {
            return Err(Error::Config(format!(
                "dirac index {index} out of range for {} points",
                space.len()
            )));
        }
        let mut weights = vec![0.0; space.len()];
        weights[index] = mass;
        Ok(Self { weights, space })
    }

    /// Discretize a density by the space's quadrature weights.
    pub fn from_density(space: Arc<StrategySpace>, density: &[f64]) -> Result<Self> {
        check_dim(space.len(), density.len())?;
        let weights = density
            .iter()
            .zip(space.quad_weights())
            .map(|(f, w)| f * w)
            .collect();
        Ok(Self { weights, space })
    }

    pub(crate) fn from_raw(space: Arc<StrategySpace>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(space.len(), weights.len());
        Self { weights, space }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn space(&self) -> &Arc<StrategySpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `mu(1)`, the total population.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    pub fn pair(&self, g: &BLFunction) -> Result<f64> {
        same_space(&self.space, &g.space)?;
        Ok(self.weights.iter().zip(&g.values).map(|(w, v)| w * v).sum())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| c * w).collect(),
            space: self.space.clone(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &DiscreteMeasure, b: f64) -> Result<Self> {
        same_space(&self.space, &other.space)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            weights,
            space: self.space.clone(),
        })
    }

    pub fn sub(&self, other: &DiscreteMeasure) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &DiscreteMeasure) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn flat_norm(&self) -> Result<f64> {
        flat_norm(self)
    }

    /// Mass-weighted mean of the strategy coordinates.
    pub fn mean_strategy(&self) -> Vec<f64> {
        let n = self.space.dim();
        let mass = self.total_mass();
        let mut out = vec![0.0; n];
        if mass == 0.0 {
            return out;
        }
        for (w, p) in self.weights.iter().zip(self.space.points()) {
            for k in 0..n {
                out[k] += w * p[k];
            }
        }
        out.iter_mut().for_each(|v| *v /= mass);
        out
    }
}

/// Builds the dual of the flat-norm LP over the points in `support`.
///
/// Primal (in `g`, `s`, `L`):
/// maximize `sum w_i g_i` with `|g_i| <= s`, `g_i - g_j <= L d_ij`,
/// `s + L <= 1`, `s, L >= 0`.
///
/// Dual: minimize `tau` subject to
/// `alpha_i - beta_i + sum_j (pi_ij - pi_ji) = w_i`,
/// `tau - sum_i (alpha_i + beta_i) - e_s = 0`,
/// `tau - sum_ij pi_ij d_ij - e_L = 0`, all variables nonnegative.
/// The basis `{alpha_i or beta_i by sign of w_i, tau, e_L}` is feasible,
/// so no phase one is needed.
fn flat_norm_lp(space: &StrategySpace, support: &[usize], w: &[f64]) -> (StandardLp, Vec<usize>) {
    let k = support.len();
    let n_pairs = k * (k - 1);
    let alpha = 0;
    let beta = k;
    let pi = 2 * k;
    let tau = pi + n_pairs;
    let e_s = tau + 1;
    let e_l = tau + 2;
    let cols = e_l + 1;
    let rows = k + 2;
    let row_s = k;
    let row_l = k + 1;

    let mut lp = StandardLp::new(rows, cols);
    for i in 0..k {
        lp.set(i, alpha + i, 1.0);
        lp.set(i, beta + i, -1.0);
        lp.set(row_s, alpha + i, -1.0);
        lp.set(row_s, beta + i, -1.0);
        lp.b[i] = w[i];
    }
    let mut p = pi;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            lp.set(i, p, 1.0);
            lp.set(j, p, -1.0);
            lp.set(row_l, p, -space.dist(support[i], support[j]));
            p += 1;
        }
    }
    lp.set(row_s, tau, 1.0);
    lp.set(row_l, tau, 1.0);
    lp.set(row_s, e_s, -1.0);
    lp.set(row_l, e_l, -1.0);
    lp.c[tau] = 1.0;

    let mut basis: Vec<usize> = (0..k)
        .map(|i| if w[i] >= 0.0 { alpha + i } else { beta + i })
        .collect();
    basis.push(tau);
    basis.push(e_l);
    (lp, basis)
}

/// Dual bounded-Lipschitz (flat) norm, solved exactly as a linear program.
///
/// The norm only depends on the support of the measure (bounded Lipschitz
/// functions extend from any subset without increasing either seminorm), so
/// the LP is posed over the support points only.
pub fn flat_norm(mu: &DiscreteMeasure) -> Result<f64> {
    let support: Vec<usize> = (0..mu.len()).filter(|&i| mu.weights[i] != 0.0).collect();
    match support.len() {
        0 => Ok(0.0),
        1 => Ok(mu.weights[support[0]].abs()),
        _ => {
            let w: Vec<f64> = support.iter().map(|&i| mu.weights[i]).collect();
            let (lp, basis) = flat_norm_lp(&mu.space, &support, &w);
            let sol = lp.minimize_from_basis(&basis)?;
            Ok(sol.objective.max(0.0))
        }
    }
}

pub fn flat_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    flat_norm(&mu.sub(nu)?)
}

/// A family of measures indexed by the strategy points: an element of
/// `L(Q; BL*)` on a finite space. No sign or mass constraints.
#[derive(Clone, Debug)]
pub struct MeasureFamily {
    /// Row-major m x m; entry (i, j) is the mass of column j at point i.
    columns: Vec<f64>,
    space: Arc<StrategySpace>,
}

impl MeasureFamily {
    /// `matrix[i][j]` is the mass that the measure for source `q_j` puts on `q_i`.
    pub fn from_matrix(space: Arc<StrategySpace>, matrix: &[Vec<f64>]) -> Result<Self> {
        let m = space.len();
        check_dim(m, matrix.len())?;
        for row in matrix {
            check_dim(m, row.len())?;
        }
        Ok(Self {
            columns: matrix.iter().flatten().copied().collect(),
            space,
        })
    }

    /// The family `q -> f(q) delta_q`.
    pub fn diagonal(f: &BLFunction) -> Self {
        let m = f.space.len();
        let mut columns = vec![0.0; m * m];
        for i in 0..m {
            columns[i * m + i] = f.values[i];
        }
        Self {
            columns,
            space: f.space.clone(),
        }
    }

    pub fn space(&self) -> &Arc<StrategySpace> {
        &self.space
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.columns[i * self.space.len() + j]
    }

    pub fn column(&self, j: usize) -> DiscreteMeasure {
        let m = self.space.len();
        let weights = (0..m).map(|i| self.columns[i * m + j]).collect();
        DiscreteMeasure::from_raw(self.space.clone(), weights)
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.columns
            .chunks(self.space.len())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `(gamma . mu)[g] = mu[gamma(.)[g]]`, i.e. `columns * weights`.
    pub fn bullet(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        same_space(&self.space, &mu.space)?;
        let mut out = vec![0.0; mu.len()];
        self.apply_into(&mu.weights, &mut out);
        Ok(DiscreteMeasure::from_raw(self.space.clone(), out))
    }

    #[inline]
    pub(crate) fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        let m = w.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.columns[i * m..(i + 1) * m];
            *o = row.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }

    /// `sup_q ||gamma(q)||*`.
    pub fn sup_norm(&self) -> Result<f64> {
        let norms: Result<Vec<f64>> = (0..self.space.len())
            .into_par_iter()
            .map(|j| flat_norm(&self.column(j)))
            .collect();
        Ok(norms?.into_iter().fold(0.0, f64::max))
    }

    /// `sup_q ||gamma_1(q) - gamma_2(q)||*`.
    pub fn sup_norm_dist(&self, other: &MeasureFamily) -> Result<f64> {
        same_space(&self.space, &other.space)?;
        let norms: Result<Vec<f64>> = (0..self.space.len())
            .into_par_iter()
            .map(|j| flat_norm(&self.column(j).sub(&other.column(j))?))
            .collect();
        Ok(norms?.into_iter().fold(0.0, f64::max))
    }

    /// Largest ratio `||gamma(q_j) - gamma(q_k)||* / d(q_j, q_k)`.
    pub fn lipschitz_constant(&self) -> Result<f64> {
        let m = self.space.len();
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|j| ((j + 1)..m).map(move |k| (j, k)))
            .collect();
        let ratios: Result<Vec<f64>> = pairs
            .into_par_iter()
            .map(|(j, k)| {
                let diff = self.column(j).sub(&self.column(k))?;
                Ok(flat_norm(&diff)? / self.space.dist(j, k))
            })
            .collect();
        Ok(ratios?.into_iter().fold(0.0, f64::max))
    }

    /// Largest deviation of a column sum from 1, and whether any entry is negative.
    fn stochastic_defect(&self) -> Option<String> {
        let m = self.space.len();
        for j in 0..m {
            let mut sum = 0.0;
            for i in 0..m {
                let v = self.columns[i * m + j];
                if !(v >= -KERNEL_TOL) || !v.is_finite() {
                    return Some(format!("column {j} has entry {v} at row {i}"));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > KERNEL_TOL {
                return Some(format!("column {j} sums to {sum}, expected 1"));
            }
        }
        None
    }
}

/// A mutation kernel: every column is a probability vector, with a
/// certified Lipschitz bound in the flat norm.
#[derive(Clone, Debug)]
pub struct MutationKernel {
    family: MeasureFamily,
    lip_bound: f64,
}

impl MutationKernel {
    /// Validates the columns and certifies the Lipschitz bound by LP.
    pub fn from_columns(space: Arc<StrategySpace>, matrix: &[Vec<f64>]) -> Result<Self> {
        let family = MeasureFamily::from_matrix(space, matrix)?;
        Self::from_family(family)
    }

    pub fn from_family(family: MeasureFamily) -> Result<Self> {
        if let Some(msg) = family.stochastic_defect() {
            return Err(Error::Config(format!("mutation kernel: {msg}")));
        }
        let mut k = Self {
            family,
            lip_bound: 0.0,
        };
        k.certify_lip()?;
        Ok(k)
    }

    /// Recomputes and stores the Lipschitz bound; returns it.
    pub fn certify_lip(&mut self) -> Result<f64> {
        self.lip_bound = self.family.lipschitz_constant()?;
        Ok(self.lip_bound)
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn family(&self) -> &MeasureFamily {
        &self.family
    }

    pub fn space(&self) -> &Arc<StrategySpace> {
        &self.family.space
    }

    pub fn column(&self, j: usize) -> DiscreteMeasure {
        self.family.column(j)
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.family.matrix()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.family.entry(i, j)
    }

    pub fn is_pure_selection(&self) -> bool {
        let m = self.space().len();
        (0..m).all(|i| (0..m).all(|j| self.entry(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    /// The kernel `q -> delta_q`.
    pub fn pure_selection(space: Arc<StrategySpace>) -> Result<Self> {
        let one = BLFunction::constant(space, 1.0);
        Self::from_family(MeasureFamily::diagonal(&one))
    }

    /// Gaussian mutation: column j proportional to
    /// `exp(-d(q_i, q_j)^2 / bandwidth^2) * quad_weights[i]`.
    pub fn smoothed(space: Arc<StrategySpace>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        let m = space.len();
        let q = space.quad_weights();
        let mut matrix = vec![vec![0.0; m]; m];
        for j in 0..m {
            let col: Vec<f64> = (0..m)
                .map(|i| {
                    let d = space.dist(i, j) / bandwidth;
                    (-d * d).exp() * q[i]
                })
                .collect();
            let total: f64 = col.iter().sum();
            for i in 0..m {
                matrix[i][j] = col[i] / total;
            }
        }
        Self::from_columns(space, &matrix)
    }

    pub fn bullet(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        self.family.bullet(mu)
    }

    /// Bypasses validation; only for fault-injection checks.
    #[doc(hidden)]
    pub fn unchecked(family: MeasureFamily) -> Self {
        Self {
            family,
            lip_bound: f64::NAN,
        }
    }
}

pub fn bullet(gamma: &MutationKernel, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    gamma.bullet(mu)
}

/// `(f . mu)[g] = mu[f g]`: pointwise reweighting.
pub fn function_bullet(f: &BLFunction, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    same_space(&f.space, &mu.space)?;
    let weights = f.values.iter().zip(&mu.weights).map(|(a, b)| a * b).collect();
    Ok(DiscreteMeasure::from_raw(mu.space.clone(), weights))
}

/// `||gamma_1 - gamma_2||_inf*`, the kernel part of the product metric.
pub fn kernel_sup_norm_dist(g1: &MutationKernel, g2: &MutationKernel) -> Result<f64> {
    g1.family.sup_norm_dist(&g2.family)
}

pub fn certify_kernel_lip(gamma: &mut MutationKernel) -> Result<f64> {
    gamma.certify_lip()
}

pub fn make_pure_selection(space: Arc<StrategySpace>) -> Result<MutationKernel> {
    MutationKernel::pure_selection(space)
}

pub fn make_smoothed_kernel(space: Arc<StrategySpace>, bandwidth: f64) -> Result<MutationKernel> {
    MutationKernel::smoothed(space, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::maximize_leq;
    use crate::space::Metric;

    fn line(points: &[f64]) -> Arc<StrategySpace> {
        Arc::new(
            StrategySpace::build_explicit(
                points.iter().map(|&x| vec![x]).collect(),
                Metric::Euclidean,
            )
            .unwrap(),
        )
    }

    /// The primal LP solved directly with the slack-basis route.
    fn primal_flat_norm(space: &StrategySpace, w: &[f64]) -> f64 {
        // variables y_i = g_i + s >= 0, s, L; objective sum w_i y_i - (sum w) s
        let m = w.len();
        let n = m + 2;
        let (s, l) = (m, m + 1);
        let mut c = w.to_vec();
        c.push(-w.iter().sum::<f64>());
        c.push(0.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..m {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[s] = -2.0;
            a.extend(row);
            b.push(0.0);
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let mut row = vec![0.0; n];
                    row[i] = 1.0;
                    row[j] = -1.0;
                    row[l] = -space.dist(i, j);
                    a.extend(row);
                    b.push(0.0);
                }
            }
        }
        let mut row = vec![0.0; n];
        row[s] = 1.0;
        row[l] = 1.0;
        a.extend(row);
        b.push(1.0);
        maximize_leq(&c, &a, &b).unwrap().objective
    }

    #[test]
    fn bl_norms_examples() {
        let s = line(&[0.0, 1.0]);
        let n = BLFunction::constant(s.clone(), 1.0).norms();
        assert_eq!((n.sup, n.lip, n.bl), (1.0, 0.0, 1.0));
        let n = BLFunction::constant(s.clone(), 0.0).norms();
        assert_eq!((n.sup, n.lip, n.bl), (0.0, 0.0, 0.0));
        let n = BLFunction::new(s, vec![0.0, 1.0]).unwrap().norms();
        assert_eq!((n.sup, n.lip, n.bl), (1.0, 1.0, 2.0));
    }

    #[test]
    fn pair_examples() {
        let s = line(&[0.0, 1.0]);
        let g = BLFunction::new(s.clone(), vec![0.25, -3.0]).unwrap();
        let d = DiscreteMeasure::dirac(s.clone(), 0, 1.0).unwrap();
        assert_eq!(d.pair(&g).unwrap(), 0.25);
        let mu = DiscreteMeasure::new(s.clone(), vec![2.0, 3.0]).unwrap();
        assert_eq!(mu.pair(&BLFunction::constant(s, 1.0)).unwrap(), 5.0);
    }

    #[test]
    fn pair_rejects_foreign_space() {
        let mu = DiscreteMeasure::zeros(line(&[0.0, 1.0]));
        let g = BLFunction::constant(line(&[0.0, 1.0, 2.0]), 1.0);
        assert!(matches!(mu.pair(&g), Err(Error::Dimension { .. })));
    }

    #[test]
    fn flat_norm_examples() {
        let s = line(&[0.0, 1.0]);
        let mu = DiscreteMeasure::new(s.clone(), vec![2.0, 3.0]).unwrap();
        assert!((flat_norm(&mu).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(flat_norm(&DiscreteMeasure::zeros(s.clone())).unwrap(), 0.0);
        let dipole = DiscreteMeasure::new(s, vec![1.0, -1.0]).unwrap();
        // 2d/(2+d) at d = 1, also produced by the oracle tests
        assert!((flat_norm(&dipole).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dual_route_matches_primal_route() {
        let s = line(&[0.0, 0.3, 1.1, 1.7, 3.0]);
        let cases = [
            vec![1.0, -2.0, 0.5, 0.0, 0.7],
            vec![-0.2, 0.2, -0.2, 0.2, -0.2],
            vec![3.0, 1.0, 0.0, 0.0, 2.0],
            vec![0.0, -1.0, 0.0, 1.0, 0.0],
        ];
        for w in cases {
            let mu = DiscreteMeasure::new(s.clone(), w.clone()).unwrap();
            let dual = flat_norm(&mu).unwrap();
            let primal = primal_flat_norm(&s, &w);
            assert!((dual - primal).abs() < 1e-10, "{w:?}: {dual} vs {primal}");
        }
    }

    #[test]
    fn bullet_examples() {
        let s = line(&[0.0, 0.5, 2.0]);
        let mu = DiscreteMeasure::new(s.clone(), vec![0.2, -1.0, 3.0]).unwrap();
        let id = make_pure_selection(s.clone()).unwrap();
        assert_eq!(bullet(&id, &mu).unwrap().weights(), mu.weights());

        let k = make_smoothed_kernel(s.clone(), 0.8).unwrap();
        let d1 = DiscreteMeasure::dirac(s, 1, 1.0).unwrap();
        assert_eq!(bullet(&k, &d1).unwrap().weights(), k.column(1).weights());
    }

    #[test]
    fn function_bullet_examples() {
        let s = line(&[0.0, 1.0, 2.0]);
        let mu = DiscreteMeasure::new(s.clone(), vec![0.2, -1.0, 3.0]).unwrap();
        let one = BLFunction::constant(s.clone(), 1.0);
        assert_eq!(function_bullet(&one, &mu).unwrap().weights(), mu.weights());
        let zero = BLFunction::constant(s, 0.0);
        assert!(function_bullet(&zero, &mu).unwrap().weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn kernel_distance_examples() {
        let s = line(&[0.0, 1.0]);
        let id = make_pure_selection(s.clone()).unwrap();
        assert_eq!(kernel_sup_norm_dist(&id, &id).unwrap(), 0.0);
        let swap = MutationKernel::from_columns(s.clone(), &[vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        let dipole = DiscreteMeasure::new(s, vec![1.0, -1.0]).unwrap();
        let expect = flat_norm(&dipole).unwrap();
        assert!((kernel_sup_norm_dist(&id, &swap).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn certify_examples() {
        let s = line(&[0.0, 1.0]);
        let constant =
            MutationKernel::from_columns(s.clone(), &[vec![0.3, 0.3], vec![0.7, 0.7]]).unwrap();
        assert_eq!(constant.lip_bound(), 0.0);
        let id = make_pure_selection(s.clone()).unwrap();
        let dipole = DiscreteMeasure::new(s, vec![1.0, -1.0]).unwrap();
        assert!((id.lip_bound() - flat_norm(&dipole).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kernel_validation_names_column() {
        let s = line(&[0.0, 1.0]);
        let err = MutationKernel::from_columns(s, &[vec![1.0, 0.5], vec![0.0, 0.4]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn smoothed_kernel_properties() {
        let s = line(&[0.0, 1.0, 2.0, 3.0]);
        let k = make_smoothed_kernel(s.clone(), 0.7).unwrap();
        for j in 0..4 {
            let sum: f64 = k.column(j).weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let narrow = make_smoothed_kernel(s.clone(), 0.05).unwrap();
        let id = make_pure_selection(s).unwrap();
        assert!(kernel_sup_norm_dist(&narrow, &id).unwrap() < 1e-12);

        let single = Arc::new(StrategySpace::build_grid(&[0.0], &[1.0], &[1]).unwrap());
        let k1 = make_smoothed_kernel(single, 3.0).unwrap();
        assert_eq!(k1.matrix(), vec![vec![1.0]]);
        assert!(make_smoothed_kernel(line(&[0.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn isometric_embedding_of_functions() {
        let s = line(&[0.0, 0.4, 1.5]);
        let f = BLFunction::new(s, vec![0.5, -2.0, 1.25]).unwrap();
        let fam = MeasureFamily::diagonal(&f);
        for j in 0..3 {
            let n = flat_norm(&fam.column(j)).unwrap();
            assert!((n - f.values()[j].abs()).abs() < 1e-12);
        }
        assert!((fam.sup_norm().unwrap() - f.norms().sup).abs() < 1e-12);
    }
}
