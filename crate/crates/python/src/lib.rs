//! Python bindings: matrices, laws, walk simulation and the estimators.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cocycle_lab::chain::{self, ChainStart};
use cocycle_lab::{banach, conditioned, ergodic, geometry, law, orchestrator, spectral, SeedKey};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "GroupElement", frozen, from_py_object)]
#[derive(Clone)]
struct PyGroupElement(geometry::GroupElement);

#[pymethods]
impl PyGroupElement {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        geometry::GroupElement::from_rows(&rows).map(Self).map_err(err)
    }

    #[staticmethod]
    fn identity(d: usize) -> PyResult<Self> {
        geometry::GroupElement::identity(d).map(Self).map_err(err)
    }

    #[staticmethod]
    fn diagonal(entries: Vec<f64>) -> PyResult<Self> {
        geometry::GroupElement::diagonal(&entries).map(Self).map_err(err)
    }

    #[staticmethod]
    fn rotation(angle: f64) -> Self {
        Self(geometry::GroupElement::rotation(angle))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let m = self.0.entries();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    fn op_norm(&self) -> f64 {
        self.0.op_norm()
    }

    fn inv_norm(&self) -> f64 {
        self.0.inv_norm()
    }

    /// `max(‖g‖, ‖g⁻¹‖)`.
    fn weight(&self) -> f64 {
        self.0.n_value()
    }

    fn compose(&self, rhs: &PyGroupElement) -> PyResult<Self> {
        self.0.compose(&rhs.0).map(Self).map_err(err)
    }

    fn __matmul__(&self, rhs: &PyGroupElement) -> PyResult<Self> {
        self.compose(rhs)
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        self.0.scaled(c).map(Self).map_err(err)
    }

    fn act(&self, u: &PyProjPoint) -> PyProjPoint {
        PyProjPoint(geometry::act(&self.0, &u.0))
    }

    /// `log ‖g v‖` for a unit representative `v` of `u`.
    fn log_growth(&self, u: &PyProjPoint) -> f64 {
        geometry::cocycle_rho(&self.0, &u.0)
    }

    fn __repr__(&self) -> String {
        format!("GroupElement({:?})", self.rows())
    }
}

#[pyclass(name = "ProjPoint", frozen, from_py_object)]
#[derive(Clone)]
struct PyProjPoint(geometry::ProjPoint);

#[pymethods]
impl PyProjPoint {
    #[new]
    fn new(v: Vec<f64>) -> PyResult<Self> {
        geometry::ProjPoint::from_slice(&v).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_angle(angle: f64) -> Self {
        Self(geometry::ProjPoint::from_angle(angle))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Angle in `[0, π)` of a planar line.
    fn angle(&self) -> f64 {
        self.0.angle()
    }

    fn coords(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    fn distance(&self, other: &PyProjPoint) -> f64 {
        geometry::angular_dist(&self.0, &other.0)
    }

    fn __repr__(&self) -> String {
        format!("ProjPoint({:?})", self.coords())
    }
}

#[pyclass(name = "MatrixLaw", frozen, from_py_object)]
#[derive(Clone)]
struct PyMatrixLaw(law::MatrixLaw);

#[pymethods]
impl PyMatrixLaw {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let spec = law::preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name}")))?;
        law::MatrixLaw::new(spec).map(Self).map_err(err)
    }

    /// Build from the JSON form of a law table.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: law::LawSpec = serde_json::from_str(text).map_err(err)?;
        law::MatrixLaw::new(spec).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(self.0.spec()).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn delta0(&self) -> f64 {
        self.0.delta0()
    }

    fn exact_lyapunov(&self) -> Option<f64> {
        self.0.exact_lyapunov()
    }

    /// Largest `|log ‖g v‖|` over the support, if bounded.
    fn rho_bound(&self) -> Option<f64> {
        self.0.rho_bound()
    }

    fn recenter(&self, lyapunov: f64) -> PyResult<Self> {
        self.0.recenter(lyapunov).map(Self).map_err(err)
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<PyGroupElement>> {
        let mut rng = SeedKey::new(seed).derive("sample").stream(0);
        (0..n).map(|_| self.0.sample(&mut rng).map(PyGroupElement).map_err(err)).collect()
    }
}

fn start(law: &law::MatrixLaw, u: Option<&PyProjPoint>) -> PyResult<ChainStart> {
    match u {
        Some(p) => ChainStart::at(p.0.clone()).map_err(err),
        None => ChainStart::canonical(law.dim()).map_err(err),
    }
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    law::PRESET_NAMES.to_vec()
}

/// Mean and variance of `S_n` for `n = 1..=n_steps`.
#[pyfunction]
#[pyo3(signature = (law, n_steps, n_paths, seed=0, start_dir=None))]
fn run_paths(
    law: &PyMatrixLaw,
    n_steps: u64,
    n_paths: u64,
    seed: u64,
    start_dir: Option<PyProjPoint>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let x = start(&law.0, start_dir.as_ref())?;
    let run = chain::run_paths(&law.0, &x, n_steps, n_paths, SeedKey::new(seed), false).map_err(err)?;
    Ok((run.mean, run.variance))
}

#[pyfunction]
#[pyo3(signature = (law, n_steps=10_000, n_paths=64, seed=0, burn_in=200))]
fn lyapunov(law: &PyMatrixLaw, n_steps: u64, n_paths: u64, seed: u64, burn_in: u64) -> PyResult<(f64, f64)> {
    let x = start(&law.0, None)?;
    let e = ergodic::lyapunov_estimate(&law.0, &x, burn_in, n_steps, n_paths, SeedKey::new(seed)).map_err(err)?;
    Ok((e.value, e.se))
}

/// Asymptotic variance from the growth of `Var S_n`.
#[pyfunction]
#[pyo3(signature = (law, n_grid, n_paths=4000, seed=0))]
fn sigma2(law: &PyMatrixLaw, n_grid: Vec<u64>, n_paths: u64, seed: u64) -> PyResult<(f64, f64)> {
    let x = start(&law.0, None)?;
    let r = ergodic::sigma2_growth(&law.0, &x, &n_grid, n_paths, SeedKey::new(seed)).map_err(err)?;
    Ok((r.sigma2.value, r.sigma2.se))
}

#[pyfunction]
#[pyo3(signature = (law, eps, n_max=24, n_samples=400, seed=0))]
fn contraction_rate(law: &PyMatrixLaw, eps: f64, n_max: u64, n_samples: u64, seed: u64) -> PyResult<f64> {
    ergodic::contraction_rate(&law.0, eps, n_max, n_samples, SeedKey::new(seed)).map(|r| r.r_hat).map_err(err)
}

#[pyfunction]
fn holder_params(delta0: f64) -> PyResult<HashMap<&'static str, f64>> {
    let p = banach::derive_params(delta0).map_err(err)?;
    Ok(HashMap::from([
        ("delta0", p.delta0),
        ("eps", p.eps),
        ("theta", p.theta),
        ("alpha", p.alpha),
        ("beta", p.beta),
    ]))
}

/// Eigenvalues `(re, im)` of the grid operator, sorted by modulus, and the gap.
#[pyfunction]
#[pyo3(signature = (law, m, t=0.0))]
fn spectrum(law: &PyMatrixLaw, m: usize, t: f64) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let s = spectral::assemble(&law.0, m, t).and_then(|q| q.spectrum()).map_err(err)?;
    Ok((s.eigenvalues, s.gap))
}

/// Rows `(n, survivors, p_hat, ci_lo, ci_hi)` of the exit-time estimate.
#[pyfunction]
#[pyo3(signature = (law, y, n_grid, n_paths, seed=0, start_dir=None))]
fn survival(
    law: &PyMatrixLaw,
    y: f64,
    n_grid: Vec<u64>,
    n_paths: u64,
    seed: u64,
    start_dir: Option<PyProjPoint>,
) -> PyResult<Vec<(u64, u64, f64, f64, f64)>> {
    let x = start(&law.0, start_dir.as_ref())?;
    let st = conditioned::survival_prob(&law.0, &x, y, &n_grid, n_paths, SeedKey::new(seed)).map_err(err)?;
    Ok(st.rows.iter().map(|r| (r.n, r.survivors, r.p_hat, r.ci_lo, r.ci_hi)).collect())
}

/// Plateau value and standard error of `E[y + S_n; τ > n]`, or `None`.
#[pyfunction]
#[pyo3(signature = (law, y, n_grid, n_paths, seed=0))]
fn harmonic(law: &PyMatrixLaw, y: f64, n_grid: Vec<u64>, n_paths: u64, seed: u64) -> PyResult<Option<(f64, f64)>> {
    let x = start(&law.0, None)?;
    let h = conditioned::harmonic_estimate(&law.0, &x, y, &n_grid, n_paths, SeedKey::new(seed)).map_err(err)?;
    Ok(h.value.map(|e| (e.value, e.se)))
}

/// `P(τ > n)` for `n = 1..=n_max` for a walk with finitely many step values.
#[pyfunction]
fn exact_survival(values: Vec<f64>, probs: Vec<f64>, y: f64, n_max: u64) -> PyResult<Vec<f64>> {
    conditioned::exact_survival_discrete(&values, &probs, y, n_max).map_err(err)
}

/// Run an experiment config (TOML text) into `out_dir`; returns whether all checks passed.
#[pyfunction]
fn run_experiment(config: &str, out_dir: PathBuf) -> PyResult<bool> {
    let cfg = orchestrator::ExperimentConfig::from_toml(config).map_err(err)?;
    orchestrator::run(&cfg, &out_dir).map(|m| m.all_passed).map_err(err)
}

#[pyfunction]
fn verify_run(path: PathBuf) -> PyResult<bool> {
    let r = orchestrator::verify(&path).map_err(err)?;
    Ok(r.consistent && r.all_passed)
}

#[pymodule]
fn pycocycle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroupElement>()?;
    m.add_class::<PyProjPoint>()?;
    m.add_class::<PyMatrixLaw>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_paths, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(sigma2, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_rate, m)?)?;
    m.add_function(wrap_pyfunction!(holder_params, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(survival, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(exact_survival, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_run, m)?)?;
    Ok(())
}
