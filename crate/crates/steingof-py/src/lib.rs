//! Python bindings for the steingof crate.
//!
//! Samples cross the boundary as plain lists of rows (`list[list[float]]`)
//! and every report comes back as a dict mirroring the library's JSON
//! reports. All randomness is seed-parameterized, so repeated calls with the
//! same arguments return identical results.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use steingof::bench::ExperimentConfig;
use steingof::kernel::{Bandwidth, RbfKernel};
use steingof::model::{Model, ModelSpec, PerturbTarget, PerturbationSpec, ScoreModel};
use steingof::report::TestReport;
use steingof::rng::substream;
use steingof::sample::SampleSet;
use steingof::stein::{EstimatorKind, KsdEstimate};

fn to_py_err(e: steingof::Error) -> PyErr {
    use steingof::Error;
    match e {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Json(_)
        | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let objs: Vec<Py<PyAny>> =
                items.iter().map(|x| json_to_py(py, x)).collect::<PyResult<_>>()?;
            PyList::new(py, objs)?.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn report_to_py(py: Python<'_>, report: &TestReport) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn estimate_to_py(py: Python<'_>, est: &KsdEstimate) -> PyResult<Py<PyAny>> {
    let dict = PyDict::new(py);
    dict.set_item("value", est.value)?;
    dict.set_item(
        "kind",
        match est.kind {
            EstimatorKind::UStatistic => "u",
            EstimatorKind::VStatistic => "v",
            EstimatorKind::Linear => "linear",
        },
    )?;
    dict.set_item("n", est.n)?;
    dict.set_item("plugin_variance", est.plugin_variance)?;
    dict.into_py_any(py)
}

fn sample_set(rows: &[Vec<f64>]) -> PyResult<SampleSet> {
    SampleSet::from_rows(rows).map_err(to_py_err)
}

fn bandwidth_policy(bandwidth: Option<f64>) -> Bandwidth {
    bandwidth.map_or(Bandwidth::Median, Bandwidth::Fixed)
}

fn resolved_kernel(bandwidth: Option<f64>, sample: &SampleSet) -> PyResult<RbfKernel> {
    let h = bandwidth_policy(bandwidth).resolve(sample).map_err(to_py_err)?;
    RbfKernel::new(h).map_err(to_py_err)
}

/// A score-function model built from a JSON spec.
#[pyclass(frozen, name = "Model")]
struct PyModel {
    inner: Model,
}

impl PyModel {
    fn build(spec: ModelSpec) -> PyResult<Self> {
        Ok(Self { inner: spec.build().map_err(to_py_err)? })
    }
}

#[pymethods]
impl PyModel {
    /// Model(spec_json): build from a JSON model spec, e.g.
    /// '{"type": "gaussian", "mean": [0.0], "cov": [[1.0]]}'.
    #[new]
    fn new(spec_json: &str) -> PyResult<Self> {
        Self::build(ModelSpec::from_json(spec_json).map_err(to_py_err)?)
    }

    /// Load the spec from a JSON file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Self::build(ModelSpec::load(path).map_err(to_py_err)?)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    /// Score s(x) = grad_x log density(x).
    fn score(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.score(&x).map_err(to_py_err)
    }

    /// Log density up to an additive constant.
    fn log_density_unnorm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density_unnorm(&x).map_err(to_py_err)
    }

    /// Normalized log density; raises for models without one.
    fn log_density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density(&x).map_err(to_py_err)
    }

    /// Draw n i.i.d. rows from the model's exact sampler.
    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.sample(n, &mut substream(seed, &[0])).map_err(to_py_err)?;
        Ok((0..s.n()).map(|i| s.row(i).to_vec()).collect())
    }

    /// The spec this model was built from, as pretty JSON.
    fn spec_json(&self) -> String {
        self.inner.spec().to_json_pretty()
    }

    /// A new model with N(0, magnitude^2) noise applied to one parameter
    /// group: "gmm-mean", "gmm-log-weight", "gmm-log-variance", or "rbm-B".
    #[pyo3(signature = (target, magnitude, seed = 0))]
    fn perturbed(&self, target: &str, magnitude: f64, seed: u64) -> PyResult<Self> {
        let target = match target {
            "gmm-mean" => PerturbTarget::GmmMean,
            "gmm-log-weight" => PerturbTarget::GmmLogWeight,
            "gmm-log-variance" => PerturbTarget::GmmLogVariance,
            "rbm-B" => PerturbTarget::RbmCoupling,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown perturbation target {other:?}"
                )))
            }
        };
        let pert = PerturbationSpec { target, magnitude, rng_seed: seed };
        let spec = steingof::model::perturb(&self.inner.spec(), &pert, &mut substream(seed, &[0]))
            .map_err(to_py_err)?;
        Self::build(spec)
    }

    fn __repr__(&self) -> String {
        format!("Model(label={:?}, dim={})", self.inner.label(), self.inner.dim())
    }
}

/// Median pairwise distance of a sample; the default kernel bandwidth.
#[pyfunction]
fn median_bandwidth(sample: Vec<Vec<f64>>) -> PyResult<f64> {
    steingof::kernel::median_bandwidth(&sample_set(&sample)?).map_err(to_py_err)
}

/// Unbiased U-statistic estimate of the kernelized Stein discrepancy.
#[pyfunction]
#[pyo3(signature = (model, sample, bandwidth = None))]
fn ksd_u(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let kernel = resolved_kernel(bandwidth, &sample)?;
    let gram = steingof::stein::build_gram(&model.inner, &kernel, &sample).map_err(to_py_err)?;
    let est = steingof::stein::u_statistic(&gram).map_err(to_py_err)?;
    estimate_to_py(py, &est)
}

/// Nonnegative V-statistic estimate of the kernelized Stein discrepancy.
#[pyfunction]
#[pyo3(signature = (model, sample, bandwidth = None))]
fn ksd_v(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let kernel = resolved_kernel(bandwidth, &sample)?;
    let gram = steingof::stein::build_gram(&model.inner, &kernel, &sample).map_err(to_py_err)?;
    estimate_to_py(py, &steingof::stein::v_statistic(&gram))
}

/// O(n) linear-time estimate over disjoint sample pairs.
#[pyfunction]
#[pyo3(signature = (model, sample, bandwidth = None))]
fn ksd_linear(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let kernel = resolved_kernel(bandwidth, &sample)?;
    let est =
        steingof::stein::linear_statistic(&model.inner, &kernel, &sample).map_err(to_py_err)?;
    estimate_to_py(py, &est)
}

/// Multinomial-bootstrap goodness-of-fit test on the U-statistic.
#[pyfunction]
#[pyo3(signature = (model, sample, alpha = 0.05, replicates = 1000, seed = 0, bandwidth = None))]
fn ksd_bootstrap_test(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    alpha: f64,
    replicates: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let report = steingof::htest::ksd_bootstrap_test(
        &model.inner,
        bandwidth_policy(bandwidth),
        &sample,
        alpha,
        replicates,
        seed,
    )
    .map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Gaussian-threshold test on the linear-time statistic.
#[pyfunction]
#[pyo3(signature = (model, sample, alpha = 0.05, scaling = "standardized-mean", bandwidth = None))]
fn ksd_linear_test(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    alpha: f64,
    scaling: &str,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let scaling = scaling
        .parse::<steingof::htest::LinearScaling>()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sample = sample_set(&sample)?;
    let report = steingof::htest::ksd_linear_test(
        &model.inner,
        bandwidth_policy(bandwidth),
        &sample,
        alpha,
        scaling,
    )
    .map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Spectral chi-square-mixture test on n times the U-statistic.
#[pyfunction]
#[pyo3(signature = (model, sample, alpha = 0.05, draws = 100_000, seed = 0, bandwidth = None))]
fn ksd_spectral_test(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    alpha: f64,
    draws: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let report = steingof::htest::ksd_spectral_test(
        &model.inner,
        bandwidth_policy(bandwidth),
        &sample,
        alpha,
        draws,
        seed,
    )
    .map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Two-sample MMD test with a pooled permutation null.
#[pyfunction]
#[pyo3(signature = (x, y, alpha = 0.05, replicates = 1000, seed = 0, bandwidth = None))]
fn mmd_test(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    alpha: f64,
    replicates: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let x = sample_set(&x)?;
    let y = sample_set(&y)?;
    let report = steingof::baselines::mmd_bootstrap_test(
        bandwidth_policy(bandwidth),
        &x,
        &y,
        alpha,
        replicates,
        seed,
    )
    .map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Kolmogorov-Smirnov test against a univariate model's CDF.
#[pyfunction]
#[pyo3(signature = (model, sample, alpha = 0.05))]
fn ks_test(
    py: Python<'_>,
    model: &PyModel,
    sample: Vec<Vec<f64>>,
    alpha: f64,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let report =
        steingof::baselines::ks_test_model(&model.inner, &sample, alpha).map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Oracle likelihood-ratio test of H0 "sample ~ model_q" against the simple
/// alternative model_p; needs normalized densities on both models.
#[pyfunction]
#[pyo3(signature = (model_p, model_q, sample, alpha = 0.05))]
fn lr_oracle_test(
    py: Python<'_>,
    model_p: &PyModel,
    model_q: &PyModel,
    sample: Vec<Vec<f64>>,
    alpha: f64,
) -> PyResult<Py<PyAny>> {
    let sample = sample_set(&sample)?;
    let report =
        steingof::baselines::lr_oracle_test(&model_p.inner, &model_q.inner, &sample, alpha)
            .map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Finite-difference audit of a model's score against its own density.
#[pyfunction]
#[pyo3(signature = (model, points = 100, seed = 0))]
fn score_check(
    py: Python<'_>,
    model: &PyModel,
    points: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let report = steingof::bench::score_check(&model.inner, points, seed).map_err(to_py_err)?;
    let value = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// Run a configured error-rate benchmark; writes results.csv, trials.ndjson
/// and manifest.json into out_dir and returns the aggregated rate rows.
#[pyfunction]
fn run_benchmark(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<Py<PyAny>> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py_err)?;
    let summary = steingof::bench::run_benchmark(&config, out_dir).map_err(to_py_err)?;
    let value = serde_json::json!({
        "rows": summary.rows,
        "base_model": summary.base_spec,
    });
    json_to_py(py, &value)
}

/// Goodness-of-fit tests for unnormalized models via the kernelized Stein
/// discrepancy. Samples are lists of row lists; reports are dicts; every
/// routine is deterministic given its seed.
#[pymodule]
fn steingof_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(median_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_u, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_v, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_linear, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_bootstrap_test, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_linear_test, m)?)?;
    m.add_function(wrap_pyfunction!(ksd_spectral_test, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_test, m)?)?;
    m.add_function(wrap_pyfunction!(ks_test, m)?)?;
    m.add_function(wrap_pyfunction!(lr_oracle_test, m)?)?;
    m.add_function(wrap_pyfunction!(score_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
