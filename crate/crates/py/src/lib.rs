//! Python bindings. The module is importable as `ariel_adapt` once the built
//! shared library is named `ariel_adapt.so` (see `python/smoke_test.py`).
//!
//! Tuple values cross the boundary as plain Python objects: `bool`, `int`,
//! `float` and `str`, where strings of the form `station#3` denote entities.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use ariel_adapt::ariel::{compile_source, disassemble, read_acode, verify, write_acode, ACodeProgram, Vocabulary};
use ariel_adapt::asi::{execute, MetricMode, Snapshot};
use ariel_adapt::pareto::{derive_scenarios, pareto_front as front, Orientation, QoSPoint};
use ariel_adapt::scenario::ScenarioError;
use ariel_adapt::sim::{SimConfig, SimError, Simulation};
use ariel_adapt::tuple_space::{self as ts, EntityRef, Slot, Template, TupleId, Value, ValueKind};
use ariel_adapt::voting::{self, Policy, SensorReading, SensorState, Vitals, VotingConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parses JSON text into Python objects with the standard `json` module.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn value_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    if obj.is_instance_of::<PyBool>() {
        return Ok(Value::Bool(obj.extract()?));
    }
    if let Ok(i) = obj.extract::<i64>() {
        return Ok(Value::Int(i));
    }
    if let Ok(f) = obj.extract::<f64>() {
        return Ok(Value::Real(f));
    }
    if let Ok(s) = obj.extract::<String>() {
        return Ok(match s.parse::<EntityRef>() {
            Ok(e) => Value::Entity(e),
            Err(_) => Value::Text(s),
        });
    }
    Err(PyValueError::new_err("tuple values must be bool, int, float or str"))
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Int(i) => i.into_pyobject(py)?.into_any(),
        Value::Real(r) => r.into_pyobject(py)?.into_any(),
        Value::Text(s) => s.into_pyobject(py)?.into_any(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Entity(e) => e.to_string().into_pyobject(py)?.into_any(),
    })
}

fn values_from_py(values: &Bound<'_, PyList>) -> PyResult<Vec<Value>> {
    values.iter().map(|v| value_from_py(&v)).collect()
}

/// `None` matches anything, `"?int"`-style strings match by type, every
/// other object must be equal.
fn template_from_py(tag: Option<String>, slots: Option<&Bound<'_, PyList>>) -> PyResult<Template> {
    let mut t = Template { tag, slots: Vec::new() };
    for s in slots.into_iter().flat_map(|l| l.iter()) {
        let slot = if s.is_none() {
            Slot::Any
        } else if let Some(kind) = s.extract::<String>().ok().and_then(|x| typed_slot(&x)) {
            Slot::Typed(kind)
        } else {
            Slot::Exact(value_from_py(&s)?)
        };
        t.slots.push(slot);
    }
    Ok(t)
}

fn typed_slot(s: &str) -> Option<ValueKind> {
    Some(match s {
        "?int" => ValueKind::Int,
        "?real" => ValueKind::Real,
        "?text" => ValueKind::Text,
        "?bool" => ValueKind::Bool,
        "?entity" => ValueKind::Entity,
        _ => return None,
    })
}

fn tuple_to_py<'py>(py: Python<'py>, t: &ts::Tuple) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("id", t.id.0)?;
    d.set_item("tag", &t.tag)?;
    let values = t
        .values
        .iter()
        .map(|v| value_to_py(py, v))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("values", PyList::new(py, values)?)?;
    d.set_item("producer", t.producer.as_str())?;
    Ok(d)
}

/// Linda tuple space with producer ownership.
#[pyclass(unsendable, module = "ariel_adapt")]
pub struct TupleSpace {
    inner: ts::TupleSpace,
}

#[pymethods]
impl TupleSpace {
    #[new]
    fn new() -> Self {
        Self {
            inner: ts::TupleSpace::new(),
        }
    }

    fn register_producer(&mut self, name: &str) {
        self.inner.register_producer(name);
    }

    fn add_station(&mut self, id: u32) {
        self.inner.entities_mut().add_station(id);
    }

    fn add_access_point(&mut self, id: u32) {
        self.inner.entities_mut().add_access_point(id);
    }

    #[pyo3(signature = (id, host, priority = 0, uses_bsl_or_linda = false))]
    fn add_task(&mut self, id: u32, host: u32, priority: i64, uses_bsl_or_linda: bool) -> PyResult<()> {
        self.inner
            .entities_mut()
            .add_task(id, host, priority, uses_bsl_or_linda)
            .map_err(value_err)
    }

    fn out(&mut self, producer: &str, tag: &str, values: &Bound<'_, PyList>) -> PyResult<u64> {
        let values = values_from_py(values)?;
        self.inner.out(producer, tag, values).map(|id| id.0).map_err(value_err)
    }

    #[pyo3(signature = (tag = None, slots = None))]
    fn rd<'py>(
        &self,
        py: Python<'py>,
        tag: Option<String>,
        slots: Option<&Bound<'py, PyList>>,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let t = template_from_py(tag, slots)?;
        self.inner.rd(&t).map(|x| tuple_to_py(py, x)).transpose()
    }

    /// Withdraws the oldest match; raises `ValueError` when nothing matches
    /// or the tuple belongs to another producer.
    #[pyo3(signature = (requester, tag = None, slots = None))]
    fn take<'py>(
        &mut self,
        py: Python<'py>,
        requester: &str,
        tag: Option<String>,
        slots: Option<&Bound<'py, PyList>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = template_from_py(tag, slots)?;
        let tuple = self.inner.take(requester, &t).map_err(value_err)?;
        tuple_to_py(py, &tuple)
    }

    fn update(&mut self, producer: &str, id: u64, values: &Bound<'_, PyList>) -> PyResult<()> {
        let values = values_from_py(values)?;
        self.inner.update(producer, TupleId(id), values).map_err(value_err)
    }

    fn tuples<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.tuples().map(|t| tuple_to_py(py, t)).collect()
    }

    fn param<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.inner.param(name).map(|v| value_to_py(py, v)).transpose()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Compiled a-code program.
#[pyclass(frozen, module = "ariel_adapt")]
pub struct Program {
    inner: ACodeProgram,
}

#[pymethods]
impl Program {
    #[staticmethod]
    #[pyo3(signature = (source, name = "program", metrics = Vec::new()))]
    fn compile(source: &str, name: &str, metrics: Vec<String>) -> PyResult<Self> {
        let mut vocab = Vocabulary::default();
        vocab.extend(metrics);
        let inner = compile_source(source, name, &vocab).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_acode(text: &str) -> PyResult<Self> {
        let inner = read_acode(text).map_err(value_err)?;
        verify(&inner).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn triplets(&self) -> Vec<(i32, i32, i32)> {
        self.inner.triplets.iter().map(|t| (t.op, t.a1, t.a2)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.triplets.len()
    }

    fn to_acode(&self) -> PyResult<String> {
        write_acode(&self.inner).map_err(value_err)
    }

    fn disassemble(&self) -> String {
        disassemble(&self.inner)
    }

    /// Runs against the current state of `space`; returns the effects.
    #[pyo3(signature = (space, strict = false))]
    fn execute<'py>(&self, py: Python<'py>, space: &TupleSpace, strict: bool) -> PyResult<Bound<'py, PyAny>> {
        let mode = if strict {
            MetricMode::Strict
        } else {
            MetricMode::Lenient
        };
        let effects = execute(&self.inner, &Snapshot::of(&space.inner), mode).map_err(value_err)?;
        to_py(py, &effects)
    }
}

/// Labels of the non-dominated points, in input order.
#[pyfunction]
#[pyo3(signature = (points, maximize = Vec::new(), minimize = Vec::new()))]
fn pareto_front(
    points: Vec<(String, HashMap<String, f64>)>,
    maximize: Vec<String>,
    minimize: Vec<String>,
) -> PyResult<Vec<String>> {
    let (pts, orient) = points_and_orientation(points, maximize, minimize);
    Ok(front(&pts, &orient)
        .map_err(value_err)?
        .into_iter()
        .map(|p| p.label)
        .collect())
}

/// `SCENARIO name predicate` lines for margin boxes around the front.
#[pyfunction]
#[pyo3(signature = (points, margins, maximize = Vec::new(), minimize = Vec::new()))]
fn pareto_scenarios(
    points: Vec<(String, HashMap<String, f64>)>,
    margins: HashMap<String, f64>,
    maximize: Vec<String>,
    minimize: Vec<String>,
) -> PyResult<String> {
    let (pts, orient) = points_and_orientation(points, maximize, minimize);
    let f = front(&pts, &orient).map_err(value_err)?;
    let margins: BTreeMap<String, f64> = margins.into_iter().collect();
    Ok(derive_scenarios(&f, &orient, &margins).map_err(value_err)?.to_text())
}

fn points_and_orientation(
    points: Vec<(String, HashMap<String, f64>)>,
    maximize: Vec<String>,
    minimize: Vec<String>,
) -> (Vec<QoSPoint>, Orientation) {
    let pts = points.into_iter().map(|(l, c)| QoSPoint::new(l, c)).collect();
    let mut o = Orientation::new();
    for d in maximize {
        o = o.maximize(d);
    }
    for d in minimize {
        o = o.minimize(d);
    }
    (pts, o)
}

/// m-out-of-n vote over sensor states (`"normal"`, `"alerting"`,
/// `"unreachable"`).
#[pyfunction]
#[pyo3(signature = (states, m, disconnect_counts_as_alert = false))]
fn vote(states: Vec<String>, m: u32, disconnect_counts_as_alert: bool) -> PyResult<bool> {
    let readings = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let state = match s.as_str() {
                "normal" => SensorState::Normal,
                "alerting" => SensorState::Alerting,
                "unreachable" => SensorState::Unreachable,
                other => return Err(PyValueError::new_err(format!("unknown sensor state `{other}`"))),
            };
            Ok(SensorReading {
                sensor: i as u32 + 1,
                state,
                vitals: None,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(voting::vote_with(&readings, m, disconnect_counts_as_alert))
}

/// Severity class of a vitals reading under the default bands.
#[pyfunction]
fn classify(heartbeat_bpm: f64, temperature_c: f64, arterial_pressure: f64) -> String {
    voting::classify_scenario(&Vitals {
        heartbeat_bpm,
        temperature_c,
        arterial_pressure,
    })
}

/// Fixed m = 1..n and the adaptive policy; returns one dict per row.
#[pyfunction]
#[pyo3(signature = (config_json = None, intervals = None, seed = None))]
fn voting_sweep<'py>(
    py: Python<'py>,
    config_json: Option<&str>,
    intervals: Option<u32>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg: VotingConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(value_err)?,
        None => VotingConfig::default(),
    };
    if let Some(n) = intervals {
        cfg.intervals = n;
    }
    if let Some(s) = seed {
        cfg.model.seed = s;
    }
    let rows = voting::sweep(&cfg).map_err(value_err)?;
    to_py(py, &rows)
}

/// One trial under a fixed `m`, or the adaptive policy when `m` is `None`.
#[pyfunction]
#[pyo3(signature = (m = None, config_json = None))]
fn voting_trial<'py>(py: Python<'py>, m: Option<u32>, config_json: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: VotingConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(value_err)?,
        None => VotingConfig::default(),
    };
    let policy = m.map_or(Policy::Adaptive, Policy::Fixed);
    to_py(py, &voting::run_trial(&cfg, policy).map_err(value_err)?)
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Scenario(ScenarioError::CascadeCapExceeded { .. }) => PyRuntimeError::new_err(e.to_string()),
        e => value_err(e),
    }
}

/// Runs a simulation config (JSON text). Relative file references resolve
/// against `base_dir`. Returns a summary dict with the full trace.
#[pyfunction]
#[pyo3(signature = (config_json, until = None, base_dir = None, seed = None))]
fn run_sim<'py>(
    py: Python<'py>,
    config_json: &str,
    until: Option<u64>,
    base_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = SimConfig::from_json(config_json).map_err(sim_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let base = base_dir.unwrap_or_else(|| Path::new(".").to_path_buf());
    let bundle = config.load_bundle(&base).map_err(sim_err)?;
    let until = until.or(config.until).unwrap_or(1000);
    let mut sim = Simulation::build(config, bundle, None).map_err(sim_err)?;
    sim.run_until(until).map_err(sim_err)?;
    let d = PyDict::new(py);
    let state = sim.manager().state();
    d.set_item("scenario", &state.current)?;
    d.set_item("switches", state.switch_count)?;
    d.set_item("executions", sim.manager().executions())?;
    d.set_item("events", sim.events_processed())?;
    d.set_item("trace", to_py(py, &sim.trace())?)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "ariel_adapt")]
fn ariel_adapt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TupleSpace>()?;
    m.add_class::<Program>()?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(vote, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(voting_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(voting_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_sim, m)?)?;
    Ok(())
}
