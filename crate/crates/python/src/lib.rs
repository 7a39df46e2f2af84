//! Python bindings: the update rule, diagnostics, recurrence checks and the
//! experiment runner. Errors surface as `ValueError`, poisoned runs as
//! `ArithmeticError`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use gradbandit::experiment::{self, DiagLevel};
use gradbandit::rate_bounds::{self, RecurrenceSpec};
use gradbandit::{
    algorithm, diagnostics, policy, verify, Error, Parameters, PolicyDist, UpdateInputs,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::PoisonedState { .. } => PyArithmeticError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn params(theta: Vec<f64>) -> PyResult<Parameters> {
    Parameters::new(theta).map_err(py_err)
}

fn dist(probs: Vec<f64>) -> PyResult<PolicyDist> {
    PolicyDist::new(probs).map_err(py_err)
}

#[pyfunction]
fn softmax(theta: Vec<f64>) -> PyResult<Vec<f64>> {
    let pi = policy::softmax(&params(theta)?).map_err(py_err)?;
    Ok(pi.as_slice().to_vec())
}

#[pyfunction]
fn softmax_jacobian(probs: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(policy::softmax_jacobian(&dist(probs)?))
}

/// One update from `theta` after pulling `action` and observing `reward`.
#[pyfunction]
fn step_direct(theta: Vec<f64>, eta: f64, action: usize, reward: f64) -> PyResult<Vec<f64>> {
    let theta = params(theta)?;
    let pi = policy::softmax(&theta).map_err(py_err)?;
    let inputs = UpdateInputs::new(eta, action, reward).map_err(py_err)?;
    Ok(algorithm::step_direct(&theta, &inputs, &pi)
        .map_err(py_err)?
        .into_vec())
}

/// The same update computed as gradient ascent with the importance-sampling estimate.
#[pyfunction]
fn step_sga(theta: Vec<f64>, eta: f64, action: usize, reward: f64) -> PyResult<Vec<f64>> {
    let theta = params(theta)?;
    let pi = policy::softmax(&theta).map_err(py_err)?;
    if action >= pi.k() {
        return Err(py_err(Error::ArmOutOfRange {
            arm: action,
            k: pi.k(),
        }));
    }
    let estimate = algorithm::is_estimate(&pi, action, reward);
    Ok(algorithm::step_sga(&theta, eta, &estimate)
        .map_err(py_err)?
        .into_vec())
}

#[pyfunction]
fn is_estimate(probs: Vec<f64>, action: usize, reward: f64) -> PyResult<Vec<f64>> {
    let pi = dist(probs)?;
    if action >= pi.k() {
        return Err(py_err(Error::ArmOutOfRange {
            arm: action,
            k: pi.k(),
        }));
    }
    Ok(algorithm::is_estimate(&pi, action, reward).r_hat)
}

#[pyfunction]
fn freedman_envelope(v: f64, delta: f64, eta: f64, r_max: f64) -> PyResult<f64> {
    diagnostics::freedman_envelope(v, delta, eta, r_max).map_err(py_err)
}

fn spec(b: f64, c: f64, y0: Option<f64>, n_max: usize) -> PyResult<RecurrenceSpec> {
    match y0 {
        Some(y0) => RecurrenceSpec::new(b, c, y0, n_max),
        None => RecurrenceSpec::minimal(b, c, n_max),
    }
    .map_err(py_err)
}

/// `y_0..=y_n_max` of `y_{n+1} = y_n + b exp(-c y_n)`; `y0` defaults to the smallest admissible start.
#[pyfunction]
#[pyo3(signature = (b, c, n_max, y0=None))]
fn iterate_recurrence(b: f64, c: f64, n_max: usize, y0: Option<f64>) -> PyResult<Vec<f64>> {
    Ok(rate_bounds::iterate_recurrence(&spec(b, c, y0, n_max)?))
}

#[pyfunction]
#[pyo3(signature = (b, c, n, y0=None))]
fn log_bound(b: f64, c: f64, n: usize, y0: Option<f64>) -> PyResult<f64> {
    rate_bounds::log_bound(&spec(b, c, y0, n)?, n).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (b, c, n, y0=None))]
fn scaled_log_bound(b: f64, c: f64, n: usize, y0: Option<f64>) -> PyResult<f64> {
    rate_bounds::scaled_log_bound(&spec(b, c, y0, n)?, n).map_err(py_err)
}

#[pyfunction]
fn calibrate_rate_constant(x: Vec<f64>, b: f64) -> Option<f64> {
    rate_bounds::calibrate_rate_constant(&x, b)
}

/// Runs one suite, or all of them, returning `(suite, check, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (suite=None))]
fn run_verify(
    py: Python<'_>,
    suite: Option<String>,
) -> PyResult<Vec<(String, String, bool, String)>> {
    let reports = py
        .detach(|| match &suite {
            Some(name) => verify::run_suite(name).map(|r| vec![r]),
            None => verify::run_all(),
        })
        .map_err(py_err)?;
    Ok(reports
        .into_iter()
        .flat_map(|r| {
            let suite = r.suite.clone();
            r.checks
                .into_iter()
                .map(move |c| (suite.clone(), c.name, c.passed, c.detail))
        })
        .collect())
}

#[pyclass(name = "BanditEnv", frozen)]
struct PyBanditEnv {
    inner: gradbandit::BanditEnv,
}

#[pymethods]
impl PyBanditEnv {
    #[staticmethod]
    #[pyo3(signature = (means, sigma, r_max=1.0))]
    fn gaussian(means: Vec<f64>, sigma: f64, r_max: f64) -> PyResult<Self> {
        let inner = gradbandit::BanditEnv::gaussian(means, sigma, r_max).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn bernoulli(means: Vec<f64>) -> PyResult<Self> {
        let inner = gradbandit::BanditEnv::bernoulli(means).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (means, r_max=1.0))]
    fn point_mass(means: Vec<f64>, r_max: f64) -> PyResult<Self> {
        let inner = gradbandit::BanditEnv::point_mass(means, r_max).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means().to_vec()
    }

    #[getter]
    fn optimal_arm(&self) -> usize {
        self.inner.optimal_arm()
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.inner.gap()
    }

    fn critical_learning_rate(&self) -> f64 {
        self.inner.critical_learning_rate()
    }

    fn suboptimality(&self, probs: Vec<f64>) -> PyResult<f64> {
        let pi = self.matching(probs)?;
        Ok(self.inner.suboptimality(&pi))
    }

    fn exact_gradient(&self, probs: Vec<f64>) -> PyResult<Vec<f64>> {
        let pi = self.matching(probs)?;
        Ok(algorithm::exact_gradient(&self.inner, &pi))
    }

    fn expected_update(&self, probs: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
        let pi = self.matching(probs)?;
        Ok(algorithm::expected_update(&self.inner, &pi, eta))
    }

    fn __repr__(&self) -> String {
        format!("BanditEnv(means={:?})", self.inner.means())
    }
}

impl PyBanditEnv {
    fn matching(&self, probs: Vec<f64>) -> PyResult<PolicyDist> {
        let pi = dist(probs)?;
        if pi.k() != self.inner.k() {
            return Err(PyValueError::new_err(format!(
                "policy has {} arms, environment has {}",
                pi.k(),
                self.inner.k()
            )));
        }
        Ok(pi)
    }
}

#[pyclass(name = "Config")]
struct PyConfig {
    inner: experiment::ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn paper_default() -> Self {
        Self {
            inner: experiment::paper_default_config(),
        }
    }

    #[staticmethod]
    fn two_action() -> Self {
        Self {
            inner: experiment::two_action_config(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = experiment::ExperimentConfig::from_toml_str(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn etas(&self) -> Vec<f64> {
        self.inner.etas.clone()
    }

    #[setter]
    fn set_etas(&mut self, etas: Vec<f64>) {
        self.inner.etas = etas;
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[setter]
    fn set_seeds(&mut self, seeds: Vec<u64>) {
        self.inner.seeds = seeds;
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[setter]
    fn set_horizon(&mut self, horizon: u64) {
        self.inner.horizon = horizon;
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, seed: u64) {
        self.inner.master_seed = seed;
    }

    /// One of `"off"`, `"ckpt"`, `"step"`.
    #[setter]
    fn set_diagnostics(&mut self, level: &str) -> PyResult<()> {
        self.inner.diagnostics = level.parse::<DiagLevel>().map_err(py_err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(etas={:?}, seeds={}, horizon={})",
            self.inner.etas,
            self.inner.seeds.len(),
            self.inner.horizon
        )
    }
}

#[pyclass(name = "Trace", frozen)]
struct PyTrace {
    inner: gradbandit::RunTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn t(&self) -> Vec<u64> {
        self.inner.rows.iter().map(|r| r.t).collect()
    }

    #[getter]
    fn subopt(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.subopt).collect()
    }

    /// Floored natural log of the sub-optimality at each checkpoint.
    #[getter]
    fn log_subopt(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.log_subopt().0).collect()
    }

    #[getter]
    fn pi_star(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.pi_star).collect()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.inner.terminal.counts.clone()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.terminal.theta.clone()
    }

    #[getter]
    fn final_subopt(&self) -> f64 {
        self.inner.terminal.subopt
    }

    /// `(tau, c_fit, holds)` of the average sub-optimality rate check, or
    /// `None` when the optimal arm never reaches probability one half.
    fn rate_check(&self) -> PyResult<Option<(u64, f64, bool)>> {
        let Some(tau) = rate_bounds::choose_tau(&self.inner) else {
            return Ok(None);
        };
        let check =
            rate_bounds::average_suboptimality_bound_check(&self.inner, tau).map_err(py_err)?;
        Ok(Some((check.tau, check.c_fit, check.holds)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(seed={}, eta={}, rows={}, final_subopt={:e})",
            self.inner.seed,
            self.inner.eta,
            self.inner.rows.len(),
            self.inner.terminal.subopt
        )
    }
}

#[pyfunction]
fn run_single(py: Python<'_>, config: &PyConfig, seed: u64, eta: f64) -> PyResult<PyTrace> {
    let config = config.inner.clone();
    let inner = py
        .detach(|| experiment::run_single(&config, seed, eta))
        .map_err(py_err)?;
    Ok(PyTrace { inner })
}

/// Runs every `(eta, seed)` pair; raises on the first poisoned run.
#[pyfunction]
#[pyo3(signature = (config, parallelism=None))]
fn run_sweep(
    py: Python<'_>,
    config: &PyConfig,
    parallelism: Option<usize>,
) -> PyResult<Vec<PyTrace>> {
    let config = config.inner.clone();
    let outcome = py
        .detach(|| experiment::run_sweep(&config, parallelism))
        .map_err(py_err)?;
    if let Some(failure) = outcome.failures.into_iter().next() {
        return Err(py_err(failure.error));
    }
    Ok(outcome
        .traces
        .into_iter()
        .map(|inner| PyTrace { inner })
        .collect())
}

#[pymodule]
fn gradbandit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(step_direct, m)?)?;
    m.add_function(wrap_pyfunction!(step_sga, m)?)?;
    m.add_function(wrap_pyfunction!(is_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(freedman_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_recurrence, m)?)?;
    m.add_function(wrap_pyfunction!(log_bound, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_log_bound, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_rate_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_class::<PyBanditEnv>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrace>()?;
    m.add("LOG_SUBOPT_FLOOR", experiment::LOG_SUBOPT_FLOOR)?;
    Ok(())
}
