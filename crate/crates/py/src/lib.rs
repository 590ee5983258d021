//! Python bindings: backends, batched stepping, L1-L3 verification, the
//! mutation matrix, TOST, cross-backend transfer and throughput measurement.
//!
//! Reports come back as plain dicts with the same shape as the CLI's JSON.

use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use twinverify::bench::{sweep_batches, BenchError};
use twinverify::transfer::{
    cross_backend_transfer, tost_equivalence, CemConfig, Policy, PolicySpec, TostConfig, TrainOn, TransferConfig,
    TransferError,
};
use twinverify::verify::{
    compare_rollouts as rollouts, registered_mutants, repair_prompt, run_interaction_suite, run_mutation_matrix,
    run_property_suite, suites, RolloutConfig, VerifyError,
};
use twinverify::{registry, ComparisonMode, EnvKind, EnvState, Value};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn verify_error(e: VerifyError) -> PyErr {
    match e {
        VerifyError::Env(_) => PyRuntimeError::new_err(e.to_string()),
        _ => value_error(e),
    }
}

fn transfer_error(e: TransferError) -> PyErr {
    match e {
        TransferError::Config(_) | TransferError::Contract(_) => value_error(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into Python dicts, lists and scalars.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn lookup(id: &str) -> PyResult<Arc<dyn twinverify::Backend>> {
    registry::backend(id).ok_or_else(|| {
        PyValueError::new_err(format!("unknown backend id `{id}`; known ids: {}", registry::backend_ids().join(", ")))
    })
}

fn parse_env(name: &str) -> PyResult<EnvKind> {
    EnvKind::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown env `{name}`; use pong or cartpole")))
}

/// `None` selects the environment's twin tolerance.
fn parse_mode(kind: EnvKind, mode: Option<&str>, epsilon: Option<f32>) -> PyResult<ComparisonMode> {
    if let Some(e) = epsilon {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(PyValueError::new_err(format!("epsilon must be finite and nonnegative, got {e}")));
        }
    }
    match (mode, epsilon) {
        (None, None) => Ok(registry::default_mode(kind)),
        (Some("exact"), None) => Ok(ComparisonMode::Exact),
        (Some("epsilon") | None, e) => Ok(ComparisonMode::epsilon(e.unwrap_or(1e-5))),
        (Some("exact"), Some(_)) => Err(PyValueError::new_err("epsilon conflicts with mode='exact'")),
        (Some(other), _) => Err(PyValueError::new_err(format!("unknown mode `{other}`; use 'exact' or 'epsilon'"))),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Int(i) => i.into_pyobject(py)?.into_any(),
        Value::Real(r) => r.into_pyobject(py)?.into_any(),
    })
}

fn value_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if let Ok(b) = obj.extract::<bool>() {
        Ok(Value::Bool(b))
    } else if let Ok(i) = obj.extract::<i64>() {
        Ok(Value::Int(i))
    } else {
        Ok(Value::Real(obj.extract::<f32>()?))
    }
}

/// Full state of one environment instance, hidden fields included.
#[pyclass(name = "State", module = "twinverify", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyState(EnvState);

#[pymethods]
impl PyState {
    #[getter]
    fn env(&self) -> &'static str {
        self.0.kind().name()
    }

    /// Field values keyed by dotted path.
    fn fields<'py>(&self, py: Python<'py>) -> PyResult<Vec<(&'static str, Bound<'py, PyAny>)>> {
        self.0.fields().into_iter().map(|(k, v)| Ok((k, value_to_py(py, v)?))).collect()
    }

    fn field<'py>(&self, py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyAny>> {
        let v = self.0.field(path).ok_or_else(|| PyValueError::new_err(format!("unknown field path `{path}`")))?;
        value_to_py(py, v)
    }

    /// Copy with one field replaced.
    fn with_field(&self, path: &str, value: &Bound<'_, PyAny>) -> PyResult<Self> {
        let mut s = self.0.clone();
        s.set_field(path, value_from_py(value)?).map_err(value_error)?;
        Ok(Self(s))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = self.0.fields().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("State({}: {})", self.0.kind(), fields.join(", "))
    }
}

/// A registered backend: a reference twin, a performance twin or a mutant.
#[pyclass(name = "Backend", module = "twinverify", frozen)]
struct PyBackend(Arc<dyn twinverify::Backend>);

#[pymethods]
impl PyBackend {
    #[new]
    fn new(id: &str) -> PyResult<Self> {
        lookup(id).map(Self)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    #[getter]
    fn env(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn obs_len(&self) -> usize {
        self.0.obs_len()
    }

    #[getter]
    fn action_count(&self) -> u32 {
        self.0.action_count()
    }

    /// Resets from `derive_stream(seed, index)`; returns `(state, observation)`.
    #[pyo3(signature = (seed, index=0))]
    fn reset(&self, seed: u64, index: u32) -> (PyState, Vec<f32>) {
        let (s, obs) = self.0.reset(twinverify::derive_stream(seed, index));
        (PyState(s), obs)
    }

    /// Returns `(next_state, observation, reward, done)`; the input is unchanged.
    fn step(&self, state: &PyState, action: u32) -> PyResult<(PyState, Vec<f32>, f32, bool)> {
        let (s, out) = self.0.step(&state.0, action).map_err(value_error)?;
        Ok((PyState(s), out.observation, out.reward, out.done))
    }

    /// `size` instances; instance `i` resets from `derive_stream(seed, i)`.
    #[pyo3(signature = (size, seed=0))]
    fn batch(&self, size: u32, seed: u64) -> PyBatch {
        let streams: Vec<_> = (0..size).map(|i| twinverify::derive_stream(seed, i)).collect();
        PyBatch(Mutex::new(self.0.batch(&streams)))
    }

    fn __repr__(&self) -> String {
        format!("Backend('{}')", self.0.id())
    }
}

/// Batched instances with flat output buffers.
#[pyclass(name = "BatchEnv", module = "twinverify")]
struct PyBatch(Mutex<Box<dyn twinverify::BatchEnv>>);

impl PyBatch {
    fn with<R>(&self, f: impl FnOnce(&mut Box<dyn twinverify::BatchEnv>) -> R) -> R {
        f(&mut self.0.lock().unwrap_or_else(|p| p.into_inner()))
    }
}

#[pymethods]
impl PyBatch {
    fn __len__(&self) -> usize {
        self.with(|b| b.len())
    }

    /// One action per instance.
    fn step(&self, py: Python<'_>, actions: Vec<u32>) -> PyResult<()> {
        py.detach(|| self.with(|b| b.step(&actions))).map_err(value_error)
    }

    /// Resets every instance whose last step ended its episode.
    fn reset_done(&self) {
        self.with(|b| b.reset_done())
    }

    /// Row-major, `len * obs_len` values.
    fn observations(&self) -> Vec<f32> {
        self.with(|b| b.observations().to_vec())
    }

    fn rewards(&self) -> Vec<f32> {
        self.with(|b| b.rewards().to_vec())
    }

    fn dones(&self) -> Vec<bool> {
        self.with(|b| b.dones().to_vec())
    }

    fn state(&self, index: usize) -> PyResult<PyState> {
        self.with(|b| {
            if index >= b.len() {
                return Err(PyValueError::new_err(format!("index {index} out of range for {} instances", b.len())));
            }
            Ok(PyState(b.state(index)))
        })
    }
}

/// Every registered backend id, twins first.
#[pyfunction]
fn backend_ids() -> Vec<&'static str> {
    registry::backend_ids()
}

/// Reset stream for instance `index` under `seed`, as its raw counter.
#[pyfunction]
fn derive_stream(seed: u64, index: u32) -> u64 {
    twinverify::derive_stream(seed, index).counter
}

/// The built-in L1 property cases and L2 interaction scenarios run against `backend`.
#[pyfunction]
fn run_suites<'py>(py: Python<'py>, backend: &str) -> PyResult<Bound<'py, PyAny>> {
    let b = lookup(backend)?;
    let kind = b.kind();
    let l1 = run_property_suite("l1-properties", b.as_ref(), &suites::property_cases(kind)).map_err(verify_error)?;
    let l2 = run_interaction_suite("l2-interactions", b.as_ref(), &suites::interaction_scenarios(kind))
        .map_err(verify_error)?;
    to_py(py, &serde_json::json!({ "l1": l1, "l2": l2 }))
}

/// Seed-matched L3 rollouts. A divergence also carries `repair_prompt` text.
#[pyfunction]
#[pyo3(signature = (backend_a, backend_b, episodes=100, seed=0, mode=None, epsilon=None))]
fn compare_rollouts<'py>(
    py: Python<'py>,
    backend_a: &str,
    backend_b: &str,
    episodes: u32,
    seed: u64,
    mode: Option<&str>,
    epsilon: Option<f32>,
) -> PyResult<Bound<'py, PyAny>> {
    let (a, b) = (lookup(backend_a)?, lookup(backend_b)?);
    let mode = parse_mode(a.kind(), mode, epsilon)?;
    let report = py.detach(|| rollouts(a.as_ref(), b.as_ref(), &RolloutConfig::new(episodes, seed, mode)));
    let report = report.map_err(verify_error)?;
    let mut json = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(d) = &report.divergence {
        json["repair_prompt"] = serde_json::Value::String(repair_prompt(d));
    }
    to_py(py, &json)
}

/// Every registered mutant through L1, L2 and L3, with the catching level of each.
#[pyfunction]
#[pyo3(signature = (episodes=100, seed=0))]
fn mutation_matrix(py: Python<'_>, episodes: u32, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let report = py.detach(|| run_mutation_matrix(&registered_mutants(), episodes, seed)).map_err(verify_error)?;
    to_py(py, &report)
}

/// Welch two one-sided tests for equivalence of the means of `a` and `b` within `delta`.
#[pyfunction]
#[pyo3(signature = (a, b, delta, alpha=0.05))]
fn tost(py: Python<'_>, a: Vec<f64>, b: Vec<f64>, delta: f64, alpha: f64) -> PyResult<Bound<'_, PyAny>> {
    let result = tost_equivalence(&a, &b, &TostConfig { margin_delta: delta, alpha }).map_err(transfer_error)?;
    to_py(py, &result)
}

/// Cross-backend policy transfer between an environment's twins.
///
/// Pong uses the fixed tracker policy; CartPole trains a linear policy with
/// the cross-entropy method on the `train_on` twin.
#[pyfunction]
#[pyo3(signature = (env, train_on="perf", delta=None, alpha=0.05, seed=0, gate_episodes=Some(100)))]
fn transfer<'py>(
    py: Python<'py>,
    env: &str,
    train_on: &str,
    delta: Option<f64>,
    alpha: f64,
    seed: u64,
    gate_episodes: Option<u32>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = parse_env(env)?;
    let train_on = match train_on {
        "ref" => TrainOn::Ref,
        "perf" => TrainOn::Perf,
        other => return Err(PyValueError::new_err(format!("train_on must be 'ref' or 'perf', got `{other}`"))),
    };
    let (policy, default_delta) = match kind {
        EnvKind::Pong => (PolicySpec::Fixed { policy: Policy::Tracker }, 1.0),
        EnvKind::CartPole => (PolicySpec::Cem { config: CemConfig { seed, ..CemConfig::default() } }, 25.0),
    };
    let config = TransferConfig {
        train_on,
        tost: TostConfig { margin_delta: delta.unwrap_or(default_delta), alpha },
        base_seed: seed,
        l3_gate_episodes: gate_episodes,
        ..TransferConfig::new(policy, default_delta)
    };
    let (r, p) = (lookup(registry::reference_id(kind))?, lookup(registry::perf_id(kind))?);
    let report = py.detach(|| cross_backend_transfer(r.as_ref(), p.as_ref(), &config)).map_err(transfer_error)?;
    to_py(py, &report)
}

/// Warm-up plus `n_runs` timed runs; `steps_per_run=None` calibrates from the clock.
#[pyfunction]
#[pyo3(signature = (backend, batch_size, steps_per_run=None, n_runs=5, seed=0))]
fn measure_sps<'py>(
    py: Python<'py>,
    backend: &str,
    batch_size: usize,
    steps_per_run: Option<u64>,
    n_runs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let b = lookup(backend)?;
    let reports = py.detach(|| sweep_batches(b.as_ref(), &[batch_size], steps_per_run, n_runs, seed));
    let mut reports = reports.map_err(|e| match e {
        BenchError::Env(_) => PyRuntimeError::new_err(e.to_string()),
        _ => value_error(e),
    })?;
    to_py(py, &reports.remove(0))
}

#[pymodule]
#[pyo3(name = "twinverify")]
fn twinverify_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBackend>()?;
    m.add_class::<PyBatch>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(backend_ids, m)?)?;
    m.add_function(wrap_pyfunction!(derive_stream, m)?)?;
    m.add_function(wrap_pyfunction!(run_suites, m)?)?;
    m.add_function(wrap_pyfunction!(compare_rollouts, m)?)?;
    m.add_function(wrap_pyfunction!(mutation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(tost, m)?)?;
    m.add_function(wrap_pyfunction!(transfer, m)?)?;
    m.add_function(wrap_pyfunction!(measure_sps, m)?)?;
    Ok(())
}
