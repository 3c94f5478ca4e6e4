//! Python bindings. Errors that the CLI would report with exit code 1 become
//! `ValueError`; everything else is a `RuntimeError`.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blgame::asymptotics::{profile, ProfileOptions};
use blgame::bl::{flat_distance, DiscreteMeasure, MutationKernel};
use blgame::dynamics::{evolve, EvolveOptions};
use blgame::harness::{run_flatnorm, run_simulate};
use blgame::oracle::flat_norm_bruteforce;
use blgame::rates::VitalRates;
use blgame::space::{Metric, StrategySpace};
use blgame::verify::{run_verify, VerifyOptions};

fn err(e: blgame::Error) -> PyErr {
    if e.exit_code() == 1 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "StrategySpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpace(Arc<StrategySpace>);

#[pymethods]
impl PySpace {
    #[staticmethod]
    fn grid(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> PyResult<Self> {
        StrategySpace::build_grid(&lo, &hi, &counts)
            .map(|s| Self(Arc::new(s)))
            .map_err(err)
    }

    /// Euclidean unless `metric` (a full distance matrix) is given.
    #[staticmethod]
    #[pyo3(signature = (points, metric=None))]
    fn explicit(points: Vec<Vec<f64>>, metric: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let metric = metric.map_or(Metric::Euclidean, Metric::Explicit);
        StrategySpace::build_explicit(points, metric)
            .map(|s| Self(Arc::new(s)))
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.0.points().to_vec()
    }

    fn dist(&self, i: usize, j: usize) -> PyResult<f64> {
        let m = self.0.len();
        if i >= m || j >= m {
            return Err(PyValueError::new_err(format!("index out of range for {m} points")));
        }
        Ok(self.0.dist(i, j))
    }

    fn diameter(&self) -> f64 {
        self.0.diameter()
    }

    fn __repr__(&self) -> String {
        format!("StrategySpace(m={}, dim={})", self.0.len(), self.0.dim())
    }
}

#[pyclass(name = "Measure", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure(DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(space: &PySpace, weights: Vec<f64>) -> PyResult<Self> {
        DiscreteMeasure::new(space.0.clone(), weights)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (space, index, mass=1.0))]
    fn dirac(space: &PySpace, index: usize, mass: f64) -> PyResult<Self> {
        DiscreteMeasure::dirac(space.0.clone(), index, mass)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    fn flat_norm(&self) -> PyResult<f64> {
        self.0.flat_norm().map_err(err)
    }

    /// Brute-force flat norm; support of at most 3 points.
    fn flat_norm_oracle(&self) -> PyResult<f64> {
        flat_norm_bruteforce(&self.0).map_err(err)
    }

    fn flat_distance(&self, other: &PyMeasure) -> PyResult<f64> {
        flat_distance(&self.0, &other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Measure({:?})", self.0.weights())
    }
}

#[pyclass(name = "Kernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(MutationKernel);

#[pymethods]
impl PyKernel {
    #[staticmethod]
    fn pure_selection(space: &PySpace) -> PyResult<Self> {
        MutationKernel::pure_selection(space.0.clone())
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn smoothed(space: &PySpace, bandwidth: f64) -> PyResult<Self> {
        MutationKernel::smoothed(space.0.clone(), bandwidth)
            .map(Self)
            .map_err(err)
    }

    /// `matrix[i][j]`: mass parent `j` sends to offspring `i`.
    #[staticmethod]
    fn from_matrix(space: &PySpace, matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        MutationKernel::from_columns(space.0.clone(), &matrix)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn lip_bound(&self) -> f64 {
        self.0.lip_bound()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.matrix()
    }

    fn bullet(&self, mu: &PyMeasure) -> PyResult<PyMeasure> {
        self.0.bullet(&mu.0).map(PyMeasure).map_err(err)
    }
}

#[pyclass(name = "Rates", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRates(VitalRates);

#[pymethods]
impl PyRates {
    #[staticmethod]
    fn logistic_paper(q1: Vec<f64>, q2: Vec<f64>) -> PyResult<Self> {
        VitalRates::logistic_paper(q1, q2).map(Self).map_err(err)
    }

    #[staticmethod]
    fn logistic_a2(q1: Vec<f64>, q2: Vec<f64>, w0: f64) -> PyResult<Self> {
        VitalRates::logistic_a2(q1, q2, w0).map(Self).map_err(err)
    }

    #[staticmethod]
    fn ricker(b: Vec<f64>, c: Vec<f64>, w0: f64, d1: Vec<f64>) -> PyResult<Self> {
        VitalRates::ricker(b, c, w0, d1).map(Self).map_err(err)
    }

    #[staticmethod]
    fn beverton_holt(b: Vec<f64>, c: Vec<f64>, w0: f64, d1: Vec<f64>) -> PyResult<Self> {
        VitalRates::beverton_holt(b, c, w0, d1).map(Self).map_err(err)
    }

    fn truncate(&self, n: f64) -> PyResult<Self> {
        self.0.truncate(n).map(Self).map_err(err)
    }

    fn birth(&self, x: f64, i: usize) -> f64 {
        self.0.birth(x, i)
    }

    fn death(&self, x: f64, i: usize) -> f64 {
        self.0.death(x, i)
    }

    /// Reproduction numbers and carrying capacities as a dict.
    fn profile<'py>(&self, py: Python<'py>, space: &PySpace) -> PyResult<Bound<'py, PyDict>> {
        let p = profile(&self.0, &space.0, &ProfileOptions::default()).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("r0", p.r0.clone())?;
        d.set_item("k", p.k.clone())?;
        d.set_item("k_max", p.k_diamond)?;
        d.set_item("k_min", p.k_min)?;
        d.set_item("fittest", p.fittest())?;
        Ok(d)
    }
}

/// Integrate from `u`; returns `(times, weights)` sampled every `dt`.
#[pyfunction]
#[pyo3(signature = (u, kernel, rates, horizon, dt, scheme="picard", tol=1e-10))]
fn simulate(
    u: &PyMeasure,
    kernel: &PyKernel,
    rates: &PyRates,
    horizon: f64,
    dt: f64,
    scheme: &str,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let opts = match scheme {
        "picard" => EvolveOptions::picard(dt).with_tol(tol),
        "rk4" => EvolveOptions::rk4(dt),
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    };
    let tr = evolve(&u.0, &kernel.0, &rates.0, horizon, &opts).map_err(err)?;
    let weights = tr.states.iter().map(|s| s.weights().to_vec()).collect();
    Ok((tr.times, weights))
}

/// Flat norm of `weight,x0,x1,...` lines.
#[pyfunction]
#[pyo3(signature = (text, oracle=false))]
fn flatnorm(text: &str, oracle: bool) -> PyResult<(f64, Option<f64>)> {
    let r = run_flatnorm(text, oracle).map_err(err)?;
    Ok((r.norm, r.oracle))
}

/// Run a TOML experiment into `out_dir`; returns the final mass.
#[pyfunction]
fn run_config(config: &str, out_dir: &str) -> PyResult<f64> {
    let exp = blgame::config::parse_config(config).map_err(err)?;
    let s = run_simulate(&exp, std::path::Path::new(out_dir)).map_err(err)?;
    Ok(s.final_mass)
}

/// Returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (suite="builtin", seed=0))]
fn verify(suite: &str, seed: u64) -> PyResult<(bool, String)> {
    let r = run_verify(&VerifyOptions {
        suite: suite.into(),
        seed,
        fault: None,
    })
    .map_err(err)?;
    Ok((r.passed(), r.render()))
}

#[pymodule(name = "blgame")]
fn blgame_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyRates>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(flatnorm, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
