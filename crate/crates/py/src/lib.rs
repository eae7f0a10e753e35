//! Python bindings: `import bhs`.
//!
//! Traces cross the boundary as JSONL text and verdicts, sweep summaries and
//! events as plain dicts and lists.

use bhs_core::adversary::AdversaryStrategy;
use bhs_core::config::{parse_range, RunConfig, SweepConfig};
use bhs_core::diagram::{render_svg, render_text_pages, DEFAULT_PAGE_ROWS};
use bhs_core::harness;
use bhs_core::kernel::{Trace, WorldState};
use bhs_core::model_check::check_all;
use bhs_core::protocols::{Protocol, Reading};
use bhs_core::ring::{EdgeId, RingConfig, RoundEdgeSet};
use bhs_core::verifier::{verify as verify_trace, Verdict, DEFAULT_BOUND_FACTOR};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(String::from))
        .unwrap_or_default()
}

fn parse_trace(jsonl: &str) -> PyResult<Trace> {
    Trace::from_jsonl(jsonl).map_err(value_err)
}

/// Config overrides given as keyword arguments, in `key=value` form.
fn override_text(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if v.is_instance_of::<PyBool>() {
        return Ok(v.extract::<bool>()?.to_string());
    }
    if v.is_instance_of::<PyList>() || v.is_instance_of::<PyTuple>() {
        let parts: PyResult<Vec<String>> =
            v.try_iter()?.map(|x| Ok(x?.str()?.to_string())).collect();
        return Ok(parts?.join(","));
    }
    Ok(v.str()?.to_string())
}

#[pyclass(frozen, module = "bhs")]
struct Ring {
    inner: RingConfig,
}

#[pymethods]
impl Ring {
    #[new]
    fn new(n: usize, bh_index: usize) -> PyResult<Self> {
        Ok(Self {
            inner: RingConfig::new(n, bh_index).map_err(value_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn bh_index(&self) -> usize {
        self.inner.bh_index()
    }

    fn __repr__(&self) -> String {
        format!(
            "Ring(n={}, bh_index={})",
            self.inner.n(),
            self.inner.bh_index()
        )
    }
}

struct Fixed(RoundEdgeSet);

impl AdversaryStrategy for Fixed {
    fn name(&self) -> String {
        "python".into()
    }

    fn choose(&mut self, _: &WorldState) -> RoundEdgeSet {
        self.0
    }
}

/// A world stepped one round at a time with a caller-chosen missing edge.
#[pyclass(module = "bhs")]
struct World {
    inner: WorldState,
}

#[pymethods]
impl World {
    #[new]
    #[pyo3(signature = (n, bh_index, starts, protocol="gather_and_locate", reading="role_assignment"))]
    fn new(
        n: usize,
        bh_index: usize,
        starts: Vec<usize>,
        protocol: &str,
        reading: &str,
    ) -> PyResult<Self> {
        let cfg = RingConfig::new(n, bh_index).map_err(value_err)?;
        let protocol: Protocol = protocol.parse().map_err(value_err)?;
        let reading: Reading = reading.parse().map_err(value_err)?;
        Ok(Self {
            inner: WorldState::new(cfg, &starts, protocol, reading).map_err(value_err)?,
        })
    }

    /// Runs one round; returns its events.
    #[pyo3(signature = (missing=None))]
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        missing: Option<usize>,
    ) -> PyResult<Bound<'py, PyAny>> {
        if missing.is_some_and(|e| e >= self.inner.cfg.n()) {
            return Err(PyValueError::new_err("edge index out of range"));
        }
        let mut adv = Fixed(RoundEdgeSet {
            missing: missing.map(EdgeId),
        });
        let events = self
            .inner
            .step(&mut adv)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        to_py(py, &events)
    }

    #[getter]
    fn round(&self) -> u64 {
        self.inner.round
    }

    #[getter]
    fn quiescent(&self) -> bool {
        self.inner.quiescent()
    }

    #[getter]
    fn positions(&self) -> Vec<usize> {
        self.inner.agents.iter().map(|a| a.position).collect()
    }

    #[getter]
    fn alive(&self) -> Vec<bool> {
        self.inner.agents.iter().map(|a| a.alive).collect()
    }

    #[getter]
    fn terminated(&self) -> Vec<bool> {
        self.inner.agents.iter().map(|a| a.terminated).collect()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner
            .agents
            .iter()
            .map(|a| label(&a.proto_state))
            .collect()
    }

    #[getter]
    fn roles(&self) -> Vec<String> {
        self.inner.agents.iter().map(|a| label(&a.role)).collect()
    }

    /// Reported BH node per agent, `None` until it terminates.
    #[getter]
    fn reports(&self) -> Vec<Option<usize>> {
        self.inner
            .agents
            .iter()
            .map(|a| {
                a.terminated
                    .then(|| a.resolved_report(&self.inner.cfg))
                    .flatten()
            })
            .collect()
    }

    /// Node → owners of the pebbles lying there.
    #[getter]
    fn pebbles(&self) -> Vec<(usize, Vec<u8>)> {
        self.inner
            .pebbles
            .iter()
            .map(|(v, owners)| (*v, owners.iter().map(|a| a.0).collect()))
            .collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "World(n={}, bh_index={}, round={}, positions={:?})",
            self.inner.cfg.n(),
            self.inner.cfg.bh_index(),
            self.inner.round,
            self.positions()
        )
    }
}

/// A finished run: its trace and verdict.
#[pyclass(frozen, module = "bhs")]
struct Outcome {
    trace: Trace,
    verdict: Verdict,
}

#[pymethods]
impl Outcome {
    #[getter]
    fn solved(&self) -> bool {
        self.verdict.solved
    }

    #[getter]
    fn clean(&self) -> bool {
        self.verdict.is_clean()
    }

    #[getter]
    fn rounds(&self) -> u64 {
        self.verdict.stats.rounds
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.verdict
            .violations
            .iter()
            .map(|v| format!("{}@{}: {}", v.invariant, v.round, v.details))
            .collect()
    }

    #[getter]
    fn verdict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.verdict)
    }

    #[getter]
    fn trace_jsonl(&self) -> String {
        self.trace.to_jsonl()
    }

    /// Edges removed per round, `None` for rounds with every edge present.
    fn schedule(&self) -> Vec<Option<usize>> {
        self.trace.missing_edges()
    }

    #[pyo3(signature = (format="text", page_rows=DEFAULT_PAGE_ROWS))]
    fn render(&self, format: &str, page_rows: usize) -> PyResult<String> {
        render_trace(&self.trace, format, page_rows)
    }

    fn __repr__(&self) -> String {
        format!(
            "Outcome(solved={}, rounds={}, violations={})",
            self.verdict.solved,
            self.verdict.stats.rounds,
            self.verdict.violations.len()
        )
    }
}

fn render_trace(t: &Trace, format: &str, page_rows: usize) -> PyResult<String> {
    match format {
        "text" => Ok(render_text_pages(t, page_rows).join("\n")),
        "svg" => Ok(render_svg(t)),
        other => Err(PyValueError::new_err(format!("unknown format `{other}`"))),
    }
}

/// Simulates and verifies one run. `config` is flat TOML; keyword arguments
/// override single keys, e.g. `run(n=12, adversary="pendulum_staller")`.
#[pyfunction]
#[pyo3(signature = (config=None, **overrides))]
fn run(
    py: Python<'_>,
    config: Option<&str>,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<Outcome> {
    let mut cfg = match config {
        Some(text) => RunConfig::from_toml(text).map_err(value_err)?,
        None => RunConfig::default(),
    };
    if let Some(kw) = overrides {
        for (k, v) in kw.iter() {
            cfg.set(&format!("{}={}", k.str()?, override_text(&v)?))
                .map_err(value_err)?;
        }
    }
    let spec = cfg.resolve().map_err(value_err)?;
    let out = py
        .detach(|| harness::run(&spec))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(Outcome {
        trace: out.trace,
        verdict: out.verdict,
    })
}

/// Checks a JSONL trace; returns the verdict as a dict.
#[pyfunction]
#[pyo3(signature = (trace_jsonl, horizon=None, bound_factor=DEFAULT_BOUND_FACTOR))]
fn verify<'py>(
    py: Python<'py>,
    trace_jsonl: &str,
    horizon: Option<u64>,
    bound_factor: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = parse_trace(trace_jsonl)?;
    let v = verify_trace(&t, horizon.unwrap_or(t.header.horizon), bound_factor);
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (trace_jsonl, format="text", page_rows=DEFAULT_PAGE_ROWS))]
fn render(trace_jsonl: &str, format: &str, page_rows: usize) -> PyResult<String> {
    render_trace(&parse_trace(trace_jsonl)?, format, page_rows)
}

/// Runs a sweep given as flat TOML; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config=""))]
fn sweep<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SweepConfig::from_toml(config).map_err(value_err)?;
    let s = py
        .detach(|| harness::sweep(&cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &s)
}

#[pyfunction]
#[pyo3(signature = (seed=0, count=100, n_min=4, n_max=16, protocol="gather_and_locate"))]
fn fuzz<'py>(
    py: Python<'py>,
    seed: u64,
    count: u64,
    n_min: usize,
    n_max: usize,
    protocol: &str,
) -> PyResult<Bound<'py, PyAny>> {
    if n_min < 4 || n_max < n_min {
        return Err(PyValueError::new_err("need 4 <= n_min <= n_max"));
    }
    let protocol: Protocol = protocol.parse().map_err(value_err)?;
    let s = py.detach(|| harness::fuzz(seed, count, (n_min, n_max), protocol));
    to_py(py, &s)
}

/// Exhaustive check of every adversary schedule up to `depth` rounds.
#[pyfunction]
#[pyo3(signature = (ns="4", depth=6, protocol="gather_and_locate", reference="role_assignment"))]
fn enumerate<'py>(
    py: Python<'py>,
    ns: &str,
    depth: usize,
    protocol: &str,
    reference: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let ns: Vec<usize> = parse_range("ns", ns)
        .map_err(value_err)?
        .into_iter()
        .map(|n| n as usize)
        .collect();
    if ns.iter().any(|&n| n < 4) {
        return Err(PyValueError::new_err("ring sizes start at 4"));
    }
    let protocol: Protocol = protocol.parse().map_err(value_err)?;
    let reading: Reading = reference.parse().map_err(value_err)?;
    let r = py.detach(|| check_all(&ns, protocol, reading, depth));
    to_py(py, &r)
}

#[pymodule]
#[pyo3(name = "bhs")]
fn bhs_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Ring>()?;
    m.add_class::<World>()?;
    m.add_class::<Outcome>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    Ok(())
}
