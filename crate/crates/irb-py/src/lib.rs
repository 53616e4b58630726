//! Python bindings for the operator library: expressions, scenarios, the
//! contraction certificate, the grid solver, and the structural checks.

use irb::cli::runner;
use irb::cli::scenario::{self, Scenario};
use irb::expr::{self, Expr};
use irb::fixpoint;
use irb::operator::{apply_irb, GridFunction, Space};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A formula in the variables `t` and `x`.
#[pyclass(name = "Expression")]
struct PyExpression {
    inner: Expr,
}

#[pymethods]
impl PyExpression {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyExpression {
            inner: expr::parse(text).map_err(value_err)?,
        })
    }

    fn eval(&self, t: f64, x: f64) -> PyResult<f64> {
        expr::eval(&self.inner, t, x).map_err(value_err)
    }

    fn pretty(&self) -> String {
        expr::pretty(&self.inner)
    }

    fn __str__(&self) -> String {
        self.pretty()
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.pretty())
    }
}

/// A full experiment description: domain, map family, q/s, norm, iteration
/// budget, output names.
#[pyclass(name = "Scenario")]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// Load one of the built-in scenarios by name.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        scenario::builtin(name)
            .map(|inner| PyScenario { inner })
            .ok_or_else(|| value_err(format!("no builtin scenario named `{name}`")))
    }

    /// Parse scenario config text (same format as the CLI's files).
    #[staticmethod]
    #[pyo3(signature = (text, name = "scenario"))]
    fn from_text(text: &str, name: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: scenario::parse_config(text, name).map_err(value_err)?,
        })
    }

    /// Canonical config text for this scenario.
    fn dump(&self) -> String {
        scenario::dump(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn space(&self) -> String {
        match self.inner.space {
            Space::Sup => "sup".to_string(),
            Space::Lp(p) => format!("lp {p}"),
        }
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.n_x
    }

    #[setter]
    fn set_nx(&mut self, nx: usize) -> PyResult<()> {
        if nx < 2 {
            return Err(value_err(format!("nx = {nx} is too small")));
        }
        if self.inner.delta >= (self.inner.b - self.inner.a) / nx as f64 {
            return Err(value_err(format!(
                "nx = {nx} makes the left offset {} larger than a grid cell",
                self.inner.delta
            )));
        }
        self.inner.n_x = nx;
        Ok(())
    }

    #[getter]
    fn nt(&self) -> usize {
        self.inner.n_t
    }

    #[setter]
    fn set_nt(&mut self, nt: usize) -> PyResult<()> {
        let align = 2 * (self.inner.n - 1);
        if nt < 2 || nt % align != 0 {
            return Err(value_err(format!(
                "nt = {nt} must be a positive multiple of 2 (n-1) = {align}"
            )));
        }
        self.inner.n_t = nt;
        Ok(())
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    #[setter]
    fn set_tol(&mut self, tol: f64) -> PyResult<()> {
        if !(tol > 0.0) {
            return Err(value_err(format!("tol = {tol} must be positive")));
        }
        self.inner.tol = tol;
        Ok(())
    }

    #[getter]
    fn kmax(&self) -> usize {
        self.inner.k_max
    }

    #[setter]
    fn set_kmax(&mut self, kmax: usize) -> PyResult<()> {
        if kmax == 0 {
            return Err(value_err("kmax must be at least 1"));
        }
        self.inner.k_max = kmax;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, nx={}, nt={}, space={:?})",
            self.inner.name,
            self.inner.n_x,
            self.inner.n_t,
            self.space()
        )
    }
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    scenario::BUILTIN_NAMES.to_vec()
}

/// Contraction certificate for the scenario, as a JSON string.
#[pyfunction]
fn certify(sc: &PyScenario) -> PyResult<String> {
    let spec = runner::build_spec(&sc.inner).map_err(value_err)?;
    let cert = runner::certificate_for(&spec).map_err(value_err)?;
    serde_json::to_string_pretty(&cert).map_err(value_err)
}

/// In-memory fixed-point solve: grid, final iterate, residuals, bounds.
#[pyclass(name = "SolveResult")]
struct PySolveResult {
    #[pyo3(get)]
    xs: Vec<f64>,
    #[pyo3(get)]
    values: Vec<f64>,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    bounds: Option<Vec<f64>>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    certificate: String,
    #[pyo3(get)]
    warnings: Vec<String>,
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(iterations={}, converged={}, final_residual={:?})",
            self.iterations,
            self.converged,
            self.residuals.last()
        )
    }
}

#[pyfunction]
fn solve(sc: &PyScenario) -> PyResult<PySolveResult> {
    let spec = runner::build_spec(&sc.inner).map_err(value_err)?;
    let cert = runner::certificate_for(&spec).map_err(value_err)?;
    let contraction = cert.pass.then_some(cert.criterion);
    let f0 = runner::start_function(&sc.inner, &spec).map_err(value_err)?;
    let rep =
        fixpoint::solve(&spec, &f0, sc.inner.tol, sc.inner.k_max, contraction).map_err(value_err)?;
    let last = rep.last();
    Ok(PySolveResult {
        xs: (0..last.len()).map(|i| last.x_at(i)).collect(),
        values: last.values().to_vec(),
        residuals: rep.residuals.clone(),
        bounds: rep.bounds.clone(),
        iterations: rep.iterations,
        converged: rep.converged,
        certificate: serde_json::to_string_pretty(&cert).map_err(value_err)?,
        warnings: rep.warnings.clone(),
    })
}

/// Full scenario run with CSV/SVG/report artifacts written to `out_dir`.
#[pyclass(name = "RunResult")]
struct PyRunResult {
    #[pyo3(get)]
    exit_code: i32,
    #[pyo3(get)]
    report: String,
    #[pyo3(get)]
    written: Vec<String>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!("RunResult(exit_code={}, written={:?})", self.exit_code, self.written)
    }
}

#[pyfunction]
fn run(sc: &PyScenario, out_dir: &str) -> PyResult<PyRunResult> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| value_err(format!("cannot create {out_dir}: {e}")))?;
    let out = runner::run_scenario(&sc.inner, std::path::Path::new(out_dir)).map_err(value_err)?;
    Ok(PyRunResult {
        exit_code: out.exit,
        report: serde_json::to_string_pretty(&out.report).map_err(value_err)?,
        written: out
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    })
}

/// Apply the scenario's integral operator once to grid values.
#[pyfunction]
fn apply(sc: &PyScenario, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let spec = runner::build_spec(&sc.inner).map_err(value_err)?;
    if values.len() != sc.inner.n_x {
        return Err(value_err(format!(
            "expected {} grid values, got {}",
            sc.inner.n_x,
            values.len()
        )));
    }
    let f = GridFunction::new(spec.grid_a(), sc.inner.b, values).map_err(value_err)?;
    Ok(apply_irb(&spec, &f).map_err(value_err)?.values().to_vec())
}

/// Sup discrepancies between the integral and finite-sum operators on random
/// bounded test functions; returns `(per_function, max)`.
#[pyfunction]
#[pyo3(signature = (sc, nt = None, functions = 10))]
fn embed_check(sc: &PyScenario, nt: Option<usize>, functions: usize) -> PyResult<(Vec<f64>, f64)> {
    let nt = nt.unwrap_or(sc.inner.n_t);
    let out = runner::embed_check(&sc.inner, nt, functions.max(1)).map_err(value_err)?;
    Ok((out.discrepancies, out.max))
}

/// Ramp-vs-step operator error study, as a JSON string.
#[pyfunction]
#[pyo3(signature = (sc, ks = vec![4, 8, 16, 32], nt = None))]
fn approx_study(sc: &PyScenario, ks: Vec<u32>, nt: Option<usize>) -> PyResult<String> {
    let nt = nt.unwrap_or(sc.inner.n_t);
    let study = runner::approx_study(&sc.inner, &ks, nt).map_err(value_err)?;
    serde_json::to_string_pretty(&study).map_err(value_err)
}

#[pymodule]
fn irblib(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpression>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySolveResult>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(embed_check, m)?)?;
    m.add_function(wrap_pyfunction!(approx_study, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
