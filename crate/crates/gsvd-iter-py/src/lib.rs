//! Python bindings: matrix pairs, the iterative solvers, the dense
//! reference decomposition and the Tikhonov pipeline.

use std::sync::Arc;

use gsvd_iter::analysis::dense_gsvd as dense_gsvd_impl;
use gsvd_iter::deflation::compute_gsvd;
use gsvd_iter::gdgsvd::{DeflationMode, PartialGsvd, SolverOptions, Variant, Which};
use gsvd_iter::operator::{read_matrix_market, DenseOperator, MatrixPair};
use gsvd_iter::problems::{gen_example as gen_example_impl, gen_regu_problem};
use gsvd_iter::regularization::{run_tikhonov, TikhonovConfig, TikhonovMode};
use gsvd_iter::GsvdError;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err(e: GsvdError) -> PyErr {
    match e {
        GsvdError::Io(_) | GsvdError::NotConverged(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// A matrix pair `(A, B)` with the same number of columns.
#[pyclass(name = "MatrixPair", module = "gsvd_iter_py")]
#[derive(Clone)]
pub struct PyMatrixPair {
    inner: MatrixPair,
}

#[pymethods]
impl PyMatrixPair {
    /// Build from nested lists (row-major).
    #[staticmethod]
    fn from_dense(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = MatrixPair::new(
            Arc::new(DenseOperator::new(to_matrix(a)?)),
            Arc::new(DenseOperator::new(to_matrix(b)?)),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_matrix_market(a: &str, b: &str) -> PyResult<Self> {
        let ma = read_matrix_market(a).map_err(err)?;
        let mb = read_matrix_market(b).map_err(err)?;
        let inner = MatrixPair::new(ma.into_operator(), mb.into_operator()).map_err(err)?;
        Ok(Self { inner })
    }

    /// `(rows of A, rows of B, columns)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.a.rows(), self.inner.b.rows(), self.inner.cols())
    }

    fn a_dense(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.a.to_dense())
    }

    fn b_dense(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.b.to_dense())
    }
}

/// Computed pairs `(c, s)` with left vectors `u`, `v` and right vectors `x`
/// (lists of columns).
#[pyclass(name = "GsvdResult", module = "gsvd_iter_py", get_all)]
pub struct PyGsvdResult {
    c: Vec<f64>,
    s: Vec<f64>,
    sigma: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    mv_count: usize,
    converged: bool,
}

impl PyGsvdResult {
    fn new(g: &PartialGsvd, mv_count: usize, converged: bool) -> Self {
        Self {
            c: g.c.clone(),
            s: g.s.clone(),
            sigma: g.sigma(),
            u: to_columns(&g.u),
            v: to_columns(&g.v),
            x: to_columns(&g.x()),
            mv_count,
            converged,
        }
    }
}

fn parse_which(s: &str) -> PyResult<Which> {
    match s {
        "largest" => Ok(Which::Largest),
        "smallest" => Ok(Which::Smallest),
        _ => Err(PyValueError::new_err(format!("which must be largest or smallest, got {s}"))),
    }
}

fn parse_variant(s: &str) -> PyResult<Variant> {
    match s {
        "gd" => Ok(Variant::Gd),
        "bbgd" => Ok(Variant::BbGd),
        "md" => Ok(Variant::Md),
        _ => Err(PyValueError::new_err(format!("algorithm must be gd, bbgd or md, got {s}"))),
    }
}

fn parse_deflation(s: &str) -> PyResult<DeflationMode> {
    match s {
        "restrict" => Ok(DeflationMode::Restrict),
        "transform" => Ok(DeflationMode::Transform),
        _ => Err(PyValueError::new_err(format!("deflation must be restrict or transform, got {s}"))),
    }
}

/// Compute `count` extremal generalized singular pairs.
#[pyfunction]
#[pyo3(signature = (pair, which = "largest", count = 1, algorithm = "gd", tol = 1e-6, seed = 0, min_dim = 10, max_dim = 30, max_restarts = 100, deflation = "restrict"))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    pair: &PyMatrixPair,
    which: &str,
    count: usize,
    algorithm: &str,
    tol: f64,
    seed: u64,
    min_dim: usize,
    max_dim: usize,
    max_restarts: usize,
    deflation: &str,
) -> PyResult<PyGsvdResult> {
    let opts = SolverOptions {
        which: parse_which(which)?,
        count,
        min_dim,
        max_dim,
        max_restarts,
        tol,
        seed,
        variant: parse_variant(algorithm)?,
        deflation: parse_deflation(deflation)?,
        ..SolverOptions::default()
    };
    let pair = pair.inner.clone();
    let out = py
        .allow_threads(|| compute_gsvd(&pair, &opts))
        .map_err(err)?;
    Ok(PyGsvdResult::new(&out.gsvd, out.mv_count, out.converged))
}

/// Full dense GSVD `(c, s, x)` ordered by descending `c`.
#[pyfunction]
fn dense_gsvd(pair: &PyMatrixPair) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let g = dense_gsvd_impl(&pair.inner.a.to_dense(), &pair.inner.b.to_dense()).map_err(err)?;
    Ok((g.c.clone(), g.s.clone(), to_columns(&g.x)))
}

/// Synthetic benchmark pair and its known `(c, s)` values.
#[pyfunction]
#[pyo3(signature = (id, n, seed = 0))]
fn gen_example(id: &str, n: usize, seed: u64) -> PyResult<(PyMatrixPair, Option<Vec<(f64, f64)>>)> {
    let inst = gen_example_impl(id, n, seed).map_err(err)?;
    Ok((PyMatrixPair { inner: inst.pair }, inst.exact))
}

/// Regularization problem: pair, clean data and exact solution.
#[pyfunction]
fn regularization_problem(name: &str, n: usize) -> PyResult<(PyMatrixPair, Vec<f64>, Vec<f64>)> {
    let inst = gen_regu_problem(name.parse().map_err(err)?, n).map_err(err)?;
    let b = inst.b.map(|v| v.as_slice().to_vec()).unwrap_or_default();
    let x = inst.x_star.map(|v| v.as_slice().to_vec()).unwrap_or_default();
    Ok((PyMatrixPair { inner: inst.pair }, b, x))
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

/// Run the truncated-GSVD Tikhonov pipeline and return its report.
#[pyfunction]
#[pyo3(signature = (problem, n = 256, pairs = 15, noise = 0.01, seed = 0, mode = "first", algorithm = "md", tol = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn tikhonov(
    py: Python<'_>,
    problem: &str,
    n: usize,
    pairs: usize,
    noise: f64,
    seed: u64,
    mode: &str,
    algorithm: &str,
    tol: f64,
) -> PyResult<PyObject> {
    let mut cfg = TikhonovConfig::new(problem.parse().map_err(err)?, n);
    cfg.pairs = pairs;
    cfg.noise = noise;
    cfg.noise_seed = seed;
    cfg.mode = match mode {
        "first" => TikhonovMode::First,
        "five" => TikhonovMode::Five,
        _ => return Err(PyValueError::new_err(format!("mode must be first or five, got {mode}"))),
    };
    cfg.solver.variant = parse_variant(algorithm)?;
    cfg.solver.seed = seed;
    cfg.solver.tol = tol;
    let report = py.allow_threads(|| run_tikhonov(&cfg)).map_err(err)?;
    let value = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

#[pymodule]
fn gsvd_iter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrixPair>()?;
    m.add_class::<PyGsvdResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(dense_gsvd, m)?)?;
    m.add_function(wrap_pyfunction!(gen_example, m)?)?;
    m.add_function(wrap_pyfunction!(regularization_problem, m)?)?;
    m.add_function(wrap_pyfunction!(tikhonov, m)?)?;
    Ok(())
}
