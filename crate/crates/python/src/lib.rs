//! Python bindings. Structured values cross the boundary as plain Python
//! dicts and lists (via JSON), so results look exactly like API documents.

use std::path::PathBuf;
use std::sync::Mutex;

use inflight_core::compiler::{compile as compile_aci, explain as explain_aci, AppCentricIntent, ResourceLedger};
use inflight_core::fixtures::{self, DEFAULT_COMPLIANCE, REFERENCE_TOPOLOGY};
use inflight_core::intent::{to_aci, validate_intent, AciError, ComplianceProfileTable, IntentIds};
use inflight_core::orchestrator::{Orchestrator as CoreOrchestrator, OrchestratorError as CoreError};
use inflight_core::southbound::{FaultConfig, Southbound};
use inflight_core::topology::{load_topology, MultiLayerTopology, TopologyEvent};
use pyo3::create_exception;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::Serialize;
use serde_json::Value;

create_exception!(inflight, ValidationError, PyValueError, "Request failed validation.");
create_exception!(inflight, CompileError, PyRuntimeError, "No solution satisfies the request.");
create_exception!(inflight, OrchestratorError, PyRuntimeError, "Lifecycle, topology or log error.");

/// Accepts a JSON string or any JSON-serializable Python object.
fn to_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = if let Ok(s) = obj.cast::<PyString>() {
        s.to_string()
    } else {
        let json = obj.py().import("json")?;
        json.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid JSON: {e}")))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn core_err(e: CoreError) -> PyErr {
    match e {
        CoreError::Validation(v) => ValidationError::new_err(v.to_string()),
        CoreError::UnknownIntent(id) => PyKeyError::new_err(id),
        other => OrchestratorError::new_err(other.to_string()),
    }
}

fn profiles_from(compliance: Option<&str>) -> PyResult<ComplianceProfileTable> {
    ComplianceProfileTable::from_json(compliance.unwrap_or(DEFAULT_COMPLIANCE))
        .map_err(|e| PyValueError::new_err(format!("compliance table: {e}")))
}

/// A multi-layer topology. Defaults to the reference three-ROADM ring.
#[pyclass(module = "inflight", skip_from_py_object)]
#[derive(Clone)]
struct Topology {
    inner: MultiLayerTopology,
}

#[pymethods]
impl Topology {
    #[new]
    #[pyo3(signature = (document=None))]
    fn new(document: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let inner = match document {
            None => fixtures::reference_topology(),
            Some(doc) => load_topology(&to_value(doc)?.to_string()).map_err(|e| PyValueError::new_err(e.to_string()))?,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().map(|n| n.id.clone()).collect()
    }

    fn link_ids(&self) -> Vec<String> {
        self.inner.links().map(|l| l.id.clone()).collect()
    }

    fn sites(&self) -> Vec<String> {
        self.inner.sites().keys().cloned().collect()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.to_document())
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(nodes={}, links={}, revision={})",
            self.inner.node_count(),
            self.inner.link_count(),
            self.inner.revision()
        )
    }
}

fn first_aci(
    request: &Bound<'_, PyAny>,
    topology: &MultiLayerTopology,
) -> PyResult<Result<AppCentricIntent, AciError>> {
    let intent = validate_intent(&to_value(request)?, topology, &mut IntentIds::default())
        .map_err(|e| ValidationError::new_err(e.to_string()))?;
    Ok(to_aci(&intent, topology).map(|mut acis| acis.remove(0)))
}

/// Compiles a request against an empty ledger and returns the chosen
/// solution as a dict. Raises CompileError when nothing is feasible.
#[pyfunction]
#[pyo3(signature = (request, topology=None, compliance=None))]
fn compile<'py>(
    py: Python<'py>,
    request: &Bound<'py, PyAny>,
    topology: Option<&Topology>,
    compliance: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let topo = topology.map_or_else(fixtures::reference_topology, |t| t.inner.clone());
    let profiles = profiles_from(compliance)?;
    let aci = first_aci(request, &topo)?.map_err(|e| CompileError::new_err(e.to_string()))?;
    match compile_aci(&aci, &topo, &profiles, &ResourceLedger::default()) {
        Ok(sol) => to_py(py, &sol),
        Err(e) => Err(CompileError::new_err(format!("{}: {e}", e.code()))),
    }
}

/// Ranked candidate report for a request against an empty ledger.
#[pyfunction]
#[pyo3(signature = (request, topology=None, compliance=None))]
fn explain<'py>(
    py: Python<'py>,
    request: &Bound<'py, PyAny>,
    topology: Option<&Topology>,
    compliance: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let topo = topology.map_or_else(fixtures::reference_topology, |t| t.inner.clone());
    let profiles = profiles_from(compliance)?;
    let aci = first_aci(request, &topo)?.map_err(|e| CompileError::new_err(e.to_string()))?;
    to_py(py, &explain_aci(&aci, &topo, &profiles, &ResourceLedger::default()))
}

/// The reference topology document as a JSON string.
#[pyfunction]
fn reference_topology() -> &'static str {
    REFERENCE_TOPOLOGY
}

/// In-process orchestrator with simulated devices. With `log`, state is
/// persisted to (and recovered from) that event log.
#[pyclass(module = "inflight")]
struct Orchestrator {
    inner: Mutex<CoreOrchestrator>,
}

impl Orchestrator {
    fn with<R>(&self, f: impl FnOnce(&mut CoreOrchestrator) -> R) -> R {
        let mut guard = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }
}

#[pymethods]
impl Orchestrator {
    #[new]
    #[pyo3(signature = (topology=None, compliance=None, log=None))]
    fn new(topology: Option<&Topology>, compliance: Option<&str>, log: Option<PathBuf>) -> PyResult<Self> {
        let topo = topology.map_or_else(fixtures::reference_topology, |t| t.inner.clone());
        let profiles = profiles_from(compliance)?;
        let sb = Southbound::direct(&topo);
        let inner = match log {
            Some(path) => CoreOrchestrator::recover(topo, profiles, sb, &path).map_err(core_err)?,
            None => CoreOrchestrator::new(topo, profiles, sb),
        };
        Ok(Self {
            inner: Mutex::new(inner),
        })
    }

    /// Submits a request and returns the new intent id.
    fn submit(&self, request: &Bound<'_, PyAny>) -> PyResult<String> {
        let value = to_value(request)?;
        self.with(|o| o.submit(&value)).map_err(core_err)
    }

    fn withdraw(&self, id: &str) -> PyResult<()> {
        self.with(|o| o.withdraw(id)).map_err(core_err)
    }

    /// Recompiles a FAILED intent; returns the resulting state.
    fn retry(&self, id: &str) -> PyResult<String> {
        self.with(|o| o.retry(id)).map(|s| s.as_str().to_string()).map_err(core_err)
    }

    fn state(&self, id: &str) -> PyResult<String> {
        self.with(|o| o.intent(id).map(|i| i.state.as_str().to_string()))
            .ok_or_else(|| PyKeyError::new_err(id.to_string()))
    }

    fn intent<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        let intent = self
            .with(|o| o.intent(id).cloned())
            .ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        to_py(py, &intent)
    }

    fn intents<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.with(|o| o.intents().cloned().collect::<Vec<_>>()))
    }

    /// The installed service record, or None.
    fn service<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.with(|o| o.service(id).cloned())
            .map(|r| to_py(py, &r))
            .transpose()
    }

    fn explain<'py>(&self, py: Python<'py>, request: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let value = to_value(request)?;
        to_py(py, &self.with(|o| o.explain(&value)).map_err(core_err)?)
    }

    /// Takes a link down; returns the ids of intents that were recompiled.
    fn fail_link(&self, link_id: &str) -> PyResult<Vec<String>> {
        self.with(|o| o.handle_event(TopologyEvent::link_down(link_id)))
            .map_err(core_err)
    }

    fn restore_link(&self, link_id: &str) -> PyResult<Vec<String>> {
        self.with(|o| o.handle_event(TopologyEvent::link_up(link_id)))
            .map_err(core_err)
    }

    fn trace<'py>(&self, py: Python<'py>, src: &str, dst: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.with(|o| o.trace(src, dst)).map_err(core_err)?)
    }

    fn topology(&self) -> Topology {
        Topology {
            inner: self.with(|o| o.topology().clone()),
        }
    }

    fn device<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        let state = self
            .with(|o| o.device(id))
            .map_err(|e| OrchestratorError::new_err(e.to_string()))?;
        to_py(py, &state)
    }

    /// Installs device faults, e.g. "REJECT_PREPARE=ET1,DOWN=H2". An empty
    /// string clears them.
    fn set_faults(&self, spec: &str) -> PyResult<()> {
        let cfg: FaultConfig = spec.parse().map_err(|e| PyValueError::new_err(format!("{e}")))?;
        self.with(|o| o.southbound().apply_faults(&cfg))
            .map_err(|e| OrchestratorError::new_err(e.to_string()))
    }

    /// Consistency problems between intents, ledger, topology and devices.
    fn audit(&self) -> Vec<String> {
        self.with(|o| o.audit())
    }
}

#[pymodule]
fn inflight(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<Orchestrator>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(reference_topology, m)?)?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("CompileError", m.py().get_type::<CompileError>())?;
    m.add("OrchestratorError", m.py().get_type::<OrchestratorError>())?;
    Ok(())
}
