//! Python bindings. Datasets cross the boundary as lists of rows; parameters
//! as `GaussianMixture` objects.

use gmm_gem::analysis::{self, Classification, GridSpec, SectorBounds};
use gmm_gem::dynamics::{self, Algorithm, StopCriteria, WeightDesign};
use gmm_gem::gmm::{self as model};
use gmm_gem::{em, io, Dataset, GmmParams};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(gmm_gem, GemError, PyValueError);

const DEFAULT_BETA: f64 = 0.996;

fn err(e: impl std::fmt::Display) -> PyErr {
    GemError::new_err(e.to_string())
}

fn dataset(rows: Vec<Vec<f64>>) -> PyResult<Dataset> {
    Dataset::from_rows(&rows).map_err(err)
}

fn algorithm(name: &str, beta: Option<Vec<f64>>, k: usize) -> PyResult<Algorithm> {
    Ok(match name {
        "em" => Algorithm::Em,
        "shifted-em" => Algorithm::ShiftedEm,
        "pb-gem" => Algorithm::PbGem,
        "w-pb-gem" => {
            let design = match beta {
                Some(b) => WeightDesign::new(b),
                None => WeightDesign::uniform(k, DEFAULT_BETA),
            };
            Algorithm::WPbGem(design.map_err(err)?)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown algorithm '{other}' (expected em, shifted-em, pb-gem or w-pb-gem)"
            )))
        }
    })
}

fn bounds(m_lo: f64, l_hi: f64) -> PyResult<SectorBounds> {
    SectorBounds::new(m_lo, l_hi).map_err(err)
}

/// Gaussian mixture parameters: weights, means and covariance matrices.
#[pyclass(name = "GaussianMixture", module = "gmm_gem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMixture(GmmParams);

#[pymethods]
impl PyMixture {
    #[new]
    fn new(alpha: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        GmmParams::from_nested(&alpha, &means, &covariances)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::params_from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        io::params_to_json(&self.0)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha().iter().copied().collect()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.0.means().iter().map(|m| m.iter().copied().collect()).collect()
    }

    #[getter]
    fn covariances(&self) -> Vec<Vec<Vec<f64>>> {
        self.0
            .covariances()
            .iter()
            .map(|s| s.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    }

    /// `[alpha; means; column-major covariances]`.
    fn flatten(&self) -> Vec<f64> {
        self.0.flatten().values().iter().copied().collect()
    }

    fn log_likelihood(&self, data: Vec<Vec<f64>>) -> PyResult<f64> {
        model::log_likelihood(&self.0, &dataset(data)?).map_err(err)
    }

    /// Posterior component probabilities, one row per sample.
    fn responsibilities(&self, data: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let h = model::responsibilities(&self.0, &dataset(data)?).map_err(err)?;
        Ok(h.matrix().row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let d = model::sample(&self.0, n, seed).map_err(err)?;
        Ok(d.rows().map(<[f64]>::to_vec).collect())
    }

    /// One update of the named algorithm.
    #[pyo3(signature = (data, algorithm = "pb-gem", beta = None))]
    fn step(&self, data: Vec<Vec<f64>>, algorithm: &str, beta: Option<Vec<f64>>) -> PyResult<Self> {
        let alg = self::algorithm(algorithm, beta, self.0.k())?;
        alg.step(&self.0, &dataset(data)?).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GaussianMixture(k={}, dim={})", self.0.k(), self.0.dim())
    }
}

/// Outcome of [`run`].
#[pyclass(name = "RunResult", module = "gmm_gem", frozen, get_all)]
struct PyRunResult {
    algorithm: String,
    iterations: usize,
    termination: String,
    initial_log_likelihood: f64,
    log_likelihoods: Vec<f64>,
    step_norms: Vec<f64>,
    final_params: PyMixture,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(algorithm='{}', iterations={}, termination='{}')",
            self.algorithm, self.iterations, self.termination
        )
    }
}

#[pyfunction]
fn sample(params: &PyMixture, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    params.sample(n, seed)
}

#[pyfunction]
fn em_step(params: &PyMixture, data: Vec<Vec<f64>>) -> PyResult<PyMixture> {
    em::em_step(&params.0, &dataset(data)?).map(PyMixture).map_err(err)
}

#[pyfunction]
fn shifted_em_step(params: &PyMixture, data: Vec<Vec<f64>>) -> PyResult<PyMixture> {
    em::shifted_em_step(&params.0, &dataset(data)?).map(PyMixture).map_err(err)
}

#[pyfunction]
fn pb_gem_step(params: &PyMixture, data: Vec<Vec<f64>>) -> PyResult<PyMixture> {
    dynamics::pb_gem_step(&params.0, &dataset(data)?).map(PyMixture).map_err(err)
}

#[pyfunction]
fn w_pb_gem_step(params: &PyMixture, data: Vec<Vec<f64>>, beta: Vec<f64>) -> PyResult<PyMixture> {
    let design = WeightDesign::new(beta).map_err(err)?;
    dynamics::w_pb_gem_step(&params.0, &dataset(data)?, &design)
        .map(PyMixture)
        .map_err(err)
}

/// Gradient of the log-likelihood in the flattened layout.
#[pyfunction]
fn gradient(params: &PyMixture, data: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let g = em::grad_log_likelihood(&params.0, &dataset(data)?).map_err(err)?;
    Ok(g.values().iter().copied().collect())
}

#[pyfunction]
#[pyo3(signature = (init, data, algorithm = "pb-gem", beta = None, tol = 1e-10, max_iters = 10_000))]
fn run(
    init: &PyMixture,
    data: Vec<Vec<f64>>,
    algorithm: &str,
    beta: Option<Vec<f64>>,
    tol: f64,
    max_iters: usize,
) -> PyResult<PyRunResult> {
    let alg = self::algorithm(algorithm, beta, init.0.k())?;
    let stop = StopCriteria {
        rel_ll_tol: tol,
        max_iters,
    };
    let trace = dynamics::run_with_stride(&init.0, &dataset(data)?, &alg, &stop, None).map_err(err)?;
    Ok(PyRunResult {
        algorithm: trace.algorithm.clone(),
        iterations: trace.iterations(),
        termination: trace
            .termination
            .map_or("failed", |t| t.as_str())
            .to_string(),
        initial_log_likelihood: trace.initial_log_likelihood,
        log_likelihoods: trace.log_likelihoods(),
        step_norms: trace.records.iter().map(|r| r.step_norm).collect(),
        final_params: PyMixture(trace.final_params),
    })
}

/// `max(|1 - m|, |1 - L|)`.
#[pyfunction]
fn rate_bound(m_lo: f64, l_hi: f64) -> PyResult<f64> {
    Ok(analysis::rate_bound(&bounds(m_lo, l_hi)?))
}

#[pyfunction]
fn lmi_check(mu: f64, lam: f64, m_lo: f64, l_hi: f64) -> PyResult<bool> {
    Ok(analysis::lmi_check(mu, lam, &bounds(m_lo, l_hi)?))
}

/// Smallest certified rate and its multiplier, or `None` if no grid rate
/// below one is certified.
#[pyfunction]
fn min_feasible_rate(m_lo: f64, l_hi: f64) -> PyResult<Option<(f64, f64)>> {
    let cert = analysis::min_feasible_rate(&bounds(m_lo, l_hi)?, &GridSpec::default()).map_err(err)?;
    Ok(cert.mu_bound.zip(cert.lambda))
}

/// Spectral radius, eigenvalue moduli (largest first) and classification of
/// the update map's Jacobian at `params`.
#[pyfunction]
#[pyo3(signature = (params, data, algorithm = "pb-gem", beta = None, fd_step = 1e-6))]
fn jacobian_spectrum(
    params: &PyMixture,
    data: Vec<Vec<f64>>,
    algorithm: &str,
    beta: Option<Vec<f64>>,
    fd_step: f64,
) -> PyResult<(f64, Vec<f64>, &'static str)> {
    let alg = self::algorithm(algorithm, beta, params.0.k())?;
    let report = analysis::update_map_jacobian(&params.0, &dataset(data)?, &alg, fd_step).map_err(err)?;
    let class = match report.classification {
        Classification::NewtonLike => "newton_like",
        Classification::FirstOrder => "first_order",
        Classification::Mixed => "mixed",
    };
    Ok((report.spectral_radius(), report.eigen_moduli, class))
}

/// Per-iteration contraction factor fitted over the last third of a trace.
#[pyfunction]
fn empirical_rate(log_likelihoods: Vec<f64>, terminal: f64) -> PyResult<f64> {
    analysis::empirical_rate(&log_likelihoods, terminal).map_err(err)
}

#[pymodule(name = "gmm_gem")]
fn gmm_gem_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GemError", m.py().get_type::<GemError>())?;
    m.add_class::<PyMixture>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(em_step, m)?)?;
    m.add_function(wrap_pyfunction!(shifted_em_step, m)?)?;
    m.add_function(wrap_pyfunction!(pb_gem_step, m)?)?;
    m.add_function(wrap_pyfunction!(w_pb_gem_step, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(rate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lmi_check, m)?)?;
    m.add_function(wrap_pyfunction!(min_feasible_rate, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rate, m)?)?;
    Ok(())
}
