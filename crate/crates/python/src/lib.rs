//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sketchlsq::experiment::{method_theory, run_grid, RunConfig};
use sketchlsq::regression::{self, TestPointPolicy};
use sketchlsq::sketch::{self, SketchOptions};
use sketchlsq::theory::{self, GreedyArgument, GreedyConvention};
use sketchlsq::{DesignMatrix, DiscreteDistribution, Error, Metric, MonteCarloConfig, SketchMethod};

fn err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) | Error::Io(_) | Error::TimingBusy => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn design(rows: Vec<Vec<f64>>) -> PyResult<DesignMatrix> {
    DesignMatrix::from_rows(&rows).map_err(err)
}

fn method(tag: &str) -> PyResult<SketchMethod> {
    tag.parse().map_err(err)
}

/// The four efficiencies of one sketch, or their predicted limits.
#[pyclass(name = "EfficiencyReport", frozen, get_all, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyEfficiencyReport {
    pub ve: f64,
    pub pe: f64,
    pub re: f64,
    pub oe: f64,
}

#[pymethods]
impl PyEfficiencyReport {
    fn __getitem__(&self, metric: &str) -> PyResult<f64> {
        Ok(match metric.parse::<Metric>().map_err(err)? {
            Metric::Ve => self.ve,
            Metric::Pe => self.pe,
            Metric::Re => self.re,
            Metric::Oe => self.oe,
        })
    }

    fn __repr__(&self) -> String {
        format!("EfficiencyReport(ve={}, pe={}, re={}, oe={})", self.ve, self.pe, self.re, self.oe)
    }
}

impl PyEfficiencyReport {
    fn from_values(get: impl Fn(Metric) -> f64) -> Self {
        Self {
            ve: get(Metric::Ve),
            pe: get(Metric::Pe),
            re: get(Metric::Re),
            oe: get(Metric::Oe),
        }
    }
}

/// A drawn sketching operator.
#[pyclass(name = "SketchOperator", frozen)]
pub struct PySketchOperator {
    inner: sketch::SketchOperator,
}

#[pymethods]
impl PySketchOperator {
    /// Draws `method` at nominal size `r`. Leverage-based methods need `x`.
    #[new]
    #[pyo3(signature = (method, n, r, seed=0, x=None))]
    fn new(method: &str, n: usize, r: usize, seed: u64, x: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let m = self::method(method)?;
        let x = match x {
            Some(rows) => design(rows)?,
            None if m.needs_design() => return Err(PyValueError::new_err(format!("{m} needs the design x"))),
            None => regression::generate_gaussian_design(n.max(2), 1, None, 0).map_err(err)?,
        };
        if x.nrows() != n {
            return Err(PyValueError::new_err(format!("x has {} rows, expected n={n}", x.nrows())));
        }
        let inner = sketch::draw_sketch(m, &x, r, seed, &SketchOptions::default()).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().as_str()
    }

    #[getter]
    fn realized_rows(&self) -> usize {
        self.inner.realized_rows()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    /// Dense `r̃ × n` matrix.
    fn to_dense(&self) -> Vec<Vec<f64>> {
        sketchlsq::linalg::to_rows(self.inner.materialize().as_ref())
    }

    /// `S A` for an `n`-row matrix `A`.
    fn apply(&self, a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let a = sketchlsq::linalg::from_rows(&a).map_err(err)?;
        let out = self.inner.apply(a.as_ref()).map_err(err)?;
        Ok(sketchlsq::linalg::to_rows(out.as_ref()))
    }

    /// Exact efficiencies on design `x`; OE uses `test_point` or, when
    /// omitted, averaged over a standard normal test point.
    #[pyo3(signature = (x, test_point=None))]
    fn efficiencies(&self, x: Vec<Vec<f64>>, test_point: Option<Vec<f64>>) -> PyResult<PyEfficiencyReport> {
        let x = design(x)?;
        let tp = match test_point {
            Some(t) => TestPointPolicy::Point(t),
            None => TestPointPolicy::identity(x.ncols()),
        };
        let rep = sketchlsq::finite_sample_efficiencies(&x, &self.inner, &tp).map_err(err)?;
        Ok(PyEfficiencyReport::from_values(|m| rep.get(m)))
    }

    /// Least-squares coefficients from the sketched problem `(SX, SY)`.
    fn solve(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = design(x)?;
        sketchlsq::apply_sketch(&self.inner, &x, &y).and_then(|p| p.solve()).map_err(err)
    }
}

#[pyfunction]
fn ols(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    regression::ols_fit(&design(x)?, &y).map_err(err)
}

#[pyfunction]
fn leverage_scores(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(regression::leverage_scores(&design(x)?))
}

#[pyfunction]
#[pyo3(signature = (n, p, seed=0))]
fn gaussian_design(n: usize, p: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let x = regression::generate_gaussian_design(n, p, None, seed).map_err(err)?;
    Ok(sketchlsq::linalg::to_rows(x.matrix()))
}

#[pyfunction]
fn fwht(v: Vec<f64>) -> PyResult<Vec<f64>> {
    sketch::fwht(&v).map_err(err)
}

/// `η⁻¹(y)` of the discrete law with the given atoms and weights.
#[pyfunction]
fn eta_inverse(atoms: Vec<f64>, weights: Vec<f64>, y: f64) -> PyResult<f64> {
    DiscreteDistribution::new(atoms, weights)
        .and_then(|d| d.eta_inverse(y))
        .map_err(err)
}

/// Monte-Carlo summary: `{metric: {mean, sd, q05, q95}, "retries": k}`.
#[pyfunction]
#[pyo3(signature = (x, method, r, reps=10, seed=0))]
fn monte_carlo<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    method: &str,
    r: usize,
    reps: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let x = design(x)?;
    let tp = TestPointPolicy::identity(x.ncols());
    let s = sketchlsq::monte_carlo_efficiency(&x, self::method(method)?, r, &MonteCarloConfig::new(reps, seed), &tp)
        .map_err(err)?;
    let out = PyDict::new(py);
    for m in Metric::ALL {
        let d = PyDict::new(py);
        let ms = s.get(m);
        d.set_item("mean", ms.mean)?;
        d.set_item("sd", ms.sd)?;
        d.set_item("q05", ms.q05)?;
        d.set_item("q95", ms.q95)?;
        out.set_item(m.as_str(), d)?;
    }
    out.set_item("retries", s.retries)?;
    out.set_item("replicates", s.replicates)?;
    Ok(out)
}

/// Prediction matching `method`. With `d1, d2` the design is the two-point
/// elliptical model `w² ∈ {d1², d2²}`; otherwise Gaussian.
#[pyfunction]
#[pyo3(signature = (method, n, p, r, d1=None, d2=None, greedy_arg_convention=None))]
fn predict(
    method: &str,
    n: usize,
    p: usize,
    r: usize,
    d1: Option<f64>,
    d2: Option<f64>,
    greedy_arg_convention: Option<&str>,
) -> PyResult<PyEfficiencyReport> {
    let law = match (d1, d2) {
        (Some(a), Some(b)) => DiscreteDistribution::two_point(a * a, b * b),
        (None, None) => DiscreteDistribution::point_mass(1.0),
        _ => return Err(PyValueError::new_err("give both d1 and d2 or neither")),
    }
    .map_err(err)?;
    let greedy = match greedy_arg_convention {
        Some(s) => GreedyConvention::from_argument(s.parse::<GreedyArgument>().map_err(err)?),
        None => GreedyConvention::default(),
    };
    let t = method_theory(self::method(method)?, n, p, r, Some(&law), greedy);
    let rep = t.report.ok_or_else(|| PyValueError::new_err(t.note.clone()))?;
    Ok(PyEfficiencyReport::from_values(|m| rep.get(m)))
}

/// `r(n − p)/(n(r − p))` as a reduced fraction `(num, den)`.
#[pyfunction]
fn orthogonal_oe_rational(n: u64, p: u64, r: u64) -> PyResult<(u128, u128)> {
    theory::orthogonal_oe_rational(n, p, r).map_err(err)
}

/// Runs a sweep described by flat `key = value` text; returns one dict per row.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(config).map_err(err)?;
    let rows = run_grid(&cfg.to_grid().map_err(err)?).map_err(err)?;
    rows.into_iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("method", row.method.as_str())?;
            d.set_item("n", row.n)?;
            d.set_item("p", row.p)?;
            d.set_item("r", row.r)?;
            d.set_item("gamma", row.gamma)?;
            d.set_item("xi", row.xi)?;
            d.set_item("metric", row.metric.as_str())?;
            d.set_item("empirical_mean", row.empirical_mean)?;
            d.set_item("empirical_sd", row.empirical_sd)?;
            d.set_item("empirical_q05", row.empirical_q05)?;
            d.set_item("empirical_q95", row.empirical_q95)?;
            d.set_item("theory_value", row.theory_value)?;
            d.set_item("replicates", row.replicates)?;
            d.set_item("padded_n", row.padded_n)?;
            d.set_item("note", row.note)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn pysketchlsq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEfficiencyReport>()?;
    m.add_class::<PySketchOperator>()?;
    m.add_function(wrap_pyfunction!(ols, m)?)?;
    m.add_function(wrap_pyfunction!(leverage_scores, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_design, m)?)?;
    m.add_function(wrap_pyfunction!(fwht, m)?)?;
    m.add_function(wrap_pyfunction!(eta_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_oe_rational, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
