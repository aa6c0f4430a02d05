//! The orchestrator owns intents, the resource ledger, the topology and the
//! southbound channel. Every mutation is written to the event log before it
//! is applied, and replaying the log rebuilds the same state.

mod handle;
mod log;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ::log::{info, warn};
use serde_json::Value;
use thiserror::Error;

pub use self::handle::{CoreHandle, CoreThread};
pub use self::log::{read_log, EventLog, LogEntry, LogError, LogRecord};

use crate::compiler::{compile, explain, CompileError, ExplainReport, ResourceLedger, ServiceRecord};
use crate::intent::{
    to_aci, validate_intent, ComplianceProfileTable, IllegalTransition, Intent, IntentIds, IntentState,
    ValidationError,
};
use crate::southbound::{
    trace, DeviceFaults, DeviceState, InstallReport, Southbound, TraceResult, TransportError,
};
use crate::topology::{MultiLayerTopology, TopologyError, TopologyEvent, TopologyEventKind};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("unknown intent {0}")]
    UnknownIntent(String),
    #[error("{id}: {source}")]
    Transition {
        id: String,
        #[source]
        source: IllegalTransition,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("replay of entry {sequence} failed: {reason}")]
    Replay { sequence: u64, reason: String },
}

pub struct Orchestrator {
    topology: MultiLayerTopology,
    profiles: ComplianceProfileTable,
    ledger: ResourceLedger,
    intents: BTreeMap<String, Intent>,
    ids: IntentIds,
    southbound: Southbound,
    log: Option<EventLog>,
}

impl Orchestrator {
    /// A fresh orchestrator with no persistent log.
    pub fn new(topology: MultiLayerTopology, profiles: ComplianceProfileTable, southbound: Southbound) -> Self {
        Self {
            topology,
            profiles,
            ledger: ResourceLedger::default(),
            intents: BTreeMap::new(),
            ids: IntentIds::default(),
            southbound,
            log: None,
        }
    }

    /// Rebuilds state from the log at `path` (if any), reinstalls every
    /// INSTALLED service on the given devices and finishes any lifecycle
    /// step the previous process did not complete. `topology` is the
    /// startup topology; logged topology events are replayed onto it.
    pub fn recover(
        topology: MultiLayerTopology,
        profiles: ComplianceProfileTable,
        southbound: Southbound,
        path: &Path,
    ) -> Result<Self, OrchestratorError> {
        let entries = read_log(path)?;
        let mut orch = Self::new(topology, profiles, southbound);
        for entry in &entries {
            orch.apply(&entry.record).map_err(|e| OrchestratorError::Replay {
                sequence: entry.sequence,
                reason: e.to_string(),
            })?;
        }
        orch.log = Some(EventLog::open(path, entries.len() as u64)?);
        if !entries.is_empty() {
            info!("replayed {} log entries from {}", entries.len(), path.display());
        }
        orch.resume()?;
        Ok(orch)
    }

    pub fn topology(&self) -> &MultiLayerTopology {
        &self.topology
    }

    pub fn profiles(&self) -> &ComplianceProfileTable {
        &self.profiles
    }

    pub fn ledger(&self) -> &ResourceLedger {
        &self.ledger
    }

    pub fn intents(&self) -> impl Iterator<Item = &Intent> {
        self.intents.values()
    }

    pub fn intent(&self, id: &str) -> Option<&Intent> {
        self.intents.get(id)
    }

    pub fn service(&self, id: &str) -> Option<&ServiceRecord> {
        self.ledger.record(id)
    }

    pub fn southbound(&mut self) -> &mut Southbound {
        &mut self.southbound
    }

    /// Applies one record to in-memory state. Used both live (after the
    /// record is durably logged) and during replay.
    fn apply(&mut self, record: &LogRecord) -> Result<(), OrchestratorError> {
        match record {
            LogRecord::IntentSubmitted(intent) => {
                if let Some(n) = IntentIds::parse(&intent.id) {
                    if n > self.ids.issued() {
                        self.ids = IntentIds::starting_after(n);
                    }
                }
                self.intents.insert(intent.id.clone(), intent.clone());
            }
            LogRecord::StateChanged {
                intent_id,
                state,
                reason,
            } => {
                let intent = self
                    .intents
                    .get_mut(intent_id)
                    .ok_or_else(|| OrchestratorError::UnknownIntent(intent_id.clone()))?;
                intent
                    .transition(*state, reason.clone())
                    .map_err(|source| OrchestratorError::Transition {
                        id: intent_id.clone(),
                        source,
                    })?;
            }
            LogRecord::Reserved(rec) => {
                self.ledger.commit(&mut self.topology, rec.clone());
            }
            LogRecord::Released { intent_id } => {
                self.ledger.release(&mut self.topology, intent_id);
            }
            LogRecord::InstallReport(_) => {}
            LogRecord::TopologyEvent(event) => {
                self.topology.apply_event(event, &self.ledger)?;
            }
        }
        Ok(())
    }

    /// Write-ahead: log, then apply.
    fn record(&mut self, record: LogRecord) -> Result<(), OrchestratorError> {
        if let Some(log) = &mut self.log {
            log.append(record.clone())?;
        }
        self.apply(&record)
    }

    fn transition(&mut self, id: &str, state: IntentState, reason: impl Into<String>) -> Result<(), OrchestratorError> {
        let current = self
            .intents
            .get(id)
            .ok_or_else(|| OrchestratorError::UnknownIntent(id.to_string()))?
            .state;
        if !current.can_transition_to(state) {
            return Err(OrchestratorError::Transition {
                id: id.to_string(),
                source: IllegalTransition { from: current, to: state },
            });
        }
        self.record(LogRecord::StateChanged {
            intent_id: id.to_string(),
            state,
            reason: reason.into(),
        })
    }

    fn state_of(&self, id: &str) -> Result<IntentState, OrchestratorError> {
        self.intents
            .get(id)
            .map(|i| i.state)
            .ok_or_else(|| OrchestratorError::UnknownIntent(id.to_string()))
    }

    fn release(&mut self, id: &str) -> Result<(), OrchestratorError> {
        if self.ledger.record(id).is_some() {
            self.record(LogRecord::Released {
                intent_id: id.to_string(),
            })?;
        }
        Ok(())
    }

    /// Validates and accepts an intent request, then drives it to a stable
    /// state (INSTALLED or FAILED). Returns the new id.
    pub fn submit(&mut self, request: &Value) -> Result<String, OrchestratorError> {
        let mut ids = self.ids.clone();
        let intent = validate_intent(request, &self.topology, &mut ids)?;
        let id = intent.id.clone();
        self.record(LogRecord::IntentSubmitted(intent))?;
        self.transition(&id, IntentState::Compiling, "compiling")?;
        self.compile_and_install(&id)?;
        Ok(id)
    }

    /// Re-attempts a FAILED intent.
    pub fn retry(&mut self, id: &str) -> Result<IntentState, OrchestratorError> {
        self.transition(id, IntentState::Compiling, "retry")?;
        self.compile_and_install(id)?;
        self.state_of(id)
    }

    /// From COMPILING or RECOMPILING (holding no reservation): compile,
    /// reserve, install. Ends in INSTALLED or FAILED.
    fn compile_and_install(&mut self, id: &str) -> Result<(), OrchestratorError> {
        let intent = self.intents[id].clone();
        let solution = to_aci(&intent, &self.topology)
            .map_err(CompileError::from)
            .and_then(|mut acis| compile(&acis.remove(0), &self.topology, &self.profiles, &self.ledger));
        let solution = match solution {
            Ok(s) => s,
            Err(e) => return self.transition(id, IntentState::Failed, format!("{}: {e}", e.code())),
        };
        let record = match self.ledger.prepare(&self.topology, &solution, id) {
            Ok(r) => r,
            Err(e) => return self.transition(id, IntentState::Failed, format!("{}: {e}", e.code())),
        };
        self.record(LogRecord::Reserved(record))?;
        self.transition(
            id,
            IntentState::Installing,
            format!(
                "{} via {} λ{}",
                solution.layer,
                solution.optical_path.join(","),
                solution.wavelength_index
            ),
        )?;
        self.install(id)
    }

    /// From INSTALLING with a reservation: push the configuration.
    fn install(&mut self, id: &str) -> Result<(), OrchestratorError> {
        let record = self.ledger.record(id).cloned().expect("installing intent holds a reservation");
        let report = self.southbound.install(&record);
        self.finish_install(id, report)
    }

    fn finish_install(&mut self, id: &str, report: InstallReport) -> Result<(), OrchestratorError> {
        let installed = report.installed;
        let reason = format!(
            "install failed at {}: {}",
            report.failed_device.as_deref().unwrap_or("?"),
            report.reason.as_deref().unwrap_or("unknown")
        );
        self.record(LogRecord::InstallReport(report))?;
        if installed {
            self.transition(id, IntentState::Installed, "installed")
        } else {
            self.release(id)?;
            self.transition(id, IntentState::Failed, reason)
        }
    }

    /// Removes the service from the network and retires the intent.
    pub fn withdraw(&mut self, id: &str) -> Result<(), OrchestratorError> {
        self.transition(id, IntentState::Withdrawing, "withdraw requested")?;
        self.finish_withdraw(id)
    }

    fn finish_withdraw(&mut self, id: &str) -> Result<(), OrchestratorError> {
        if let Some(record) = self.ledger.record(id).cloned() {
            let report = self.southbound.remove(&record);
            if !report.unreachable.is_empty() {
                warn!("{id}: removal unconfirmed on {:?}", report.unreachable);
            }
        }
        self.release(id)?;
        self.transition(id, IntentState::Withdrawn, "withdrawn")
    }

    /// Applies a link state change. On LINK_DOWN every service crossing the
    /// link is recompiled, in id order. Returns the affected intent ids.
    pub fn handle_event(&mut self, event: TopologyEvent) -> Result<Vec<String>, OrchestratorError> {
        if self.topology.link(&event.link_id).is_none() {
            return Err(TopologyError::UnknownLink(event.link_id.clone()).into());
        }
        let affected = match event.kind {
            TopologyEventKind::LinkDown => self.ledger.services_using_link(&event.link_id),
            TopologyEventKind::LinkUp => Vec::new(),
        };
        let cause = format!("{} {}", event_name(&event), event.link_id);
        self.record(LogRecord::TopologyEvent(event))?;
        for id in &affected {
            if self.state_of(id)? != IntentState::Installed {
                continue;
            }
            self.transition(id, IntentState::Recompiling, cause.clone())?;
            self.finish_recompile(id)?;
        }
        Ok(affected)
    }

    /// From RECOMPILING: tear down the old service, then compile again.
    fn finish_recompile(&mut self, id: &str) -> Result<(), OrchestratorError> {
        if let Some(old) = self.ledger.record(id).cloned() {
            self.southbound.remove(&old);
        }
        self.release(id)?;
        self.compile_and_install(id)
    }

    /// Re-establishes devices and finishes interrupted work after replay.
    fn resume(&mut self) -> Result<(), OrchestratorError> {
        let ids: Vec<String> = self.intents.keys().cloned().collect();
        for id in ids {
            match self.state_of(&id)? {
                IntentState::Installed => {
                    if let Some(record) = self.ledger.record(&id).cloned() {
                        let report = self.southbound.install(&record);
                        if !report.installed {
                            warn!("{id}: resync failed: {:?}", report.reason);
                            self.transition(&id, IntentState::Recompiling, "resync failed")?;
                            self.finish_recompile(&id)?;
                        }
                    }
                }
                IntentState::Submitted => {
                    self.transition(&id, IntentState::Compiling, "resumed")?;
                    self.compile_and_install(&id)?;
                }
                IntentState::Compiling if self.ledger.record(&id).is_some() => {
                    self.transition(&id, IntentState::Installing, "resumed")?;
                    self.install(&id)?;
                }
                IntentState::Compiling => self.compile_and_install(&id)?,
                IntentState::Installing if self.ledger.record(&id).is_some() => self.install(&id)?,
                IntentState::Installing => {
                    self.transition(&id, IntentState::Failed, "install interrupted")?;
                }
                IntentState::Recompiling => self.finish_recompile(&id)?,
                IntentState::Withdrawing => self.finish_withdraw(&id)?,
                IntentState::Failed | IntentState::Withdrawn => {}
            }
        }
        Ok(())
    }

    /// Candidate report for a request, without submitting it.
    pub fn explain(&self, request: &Value) -> Result<ExplainReport, OrchestratorError> {
        let mut scratch = self.ids.clone();
        let intent = validate_intent(request, &self.topology, &mut scratch)?;
        Ok(match to_aci(&intent, &self.topology) {
            Ok(mut acis) => explain(&acis.remove(0), &self.topology, &self.profiles, &self.ledger),
            Err(e) => ExplainReport {
                candidates: Vec::new(),
                notice: Some(format!("{}: {e}", CompileError::from(e.clone()).code())),
            },
        })
    }

    pub fn device(&mut self, id: &str) -> Result<DeviceState, TransportError> {
        self.southbound.query(id)
    }

    pub fn set_faults(&mut self, device: &str, faults: DeviceFaults) -> Result<(), TransportError> {
        self.southbound.set_faults(device, faults)
    }

    pub fn trace(&mut self, src: &str, dst: &str) -> Result<TraceResult, OrchestratorError> {
        for site in [src, dst] {
            if self.topology.site(site).is_none() {
                return Err(TopologyError::UnknownSite(site.to_string()).into());
            }
        }
        let devices = self.southbound.snapshot();
        Ok(trace(&self.topology, &devices, src, dst))
    }

    /// Cross-checks intents, ledger, topology occupancy and device state.
    /// Empty means consistent.
    pub fn audit(&mut self) -> Vec<String> {
        let mut out = self.ledger.audit(&self.topology);
        let devices = self.southbound.snapshot();
        let mut expected: BTreeMap<(String, String), &crate::southbound::messages::Payload> = BTreeMap::new();
        for intent in self.intents.values() {
            let record = self.ledger.record(&intent.id);
            match (intent.state, record) {
                (IntentState::Installed, None) => out.push(format!("{} INSTALLED without reservation", intent.id)),
                (IntentState::Installed, Some(r)) => {
                    for (mid, op) in r.message_ids().into_iter().zip(&r.solution.operations) {
                        expected.insert((op.device_id.clone(), mid), &op.params);
                    }
                }
                (IntentState::Failed | IntentState::Withdrawn, Some(_)) => {
                    out.push(format!("{} is {} but holds a reservation", intent.id, intent.state))
                }
                _ => {}
            }
        }
        let mut seen = BTreeSet::new();
        for (device, state) in &devices {
            if !state.pending_configs.is_empty() {
                out.push(format!("{device}: {} pending configs", state.pending_configs.len()));
            }
            for (mid, payload) in &state.applied_configs {
                match expected.get(&(device.clone(), mid.clone())) {
                    Some(p) if *p == payload => {
                        seen.insert((device.clone(), mid.clone()));
                    }
                    _ => out.push(format!("{device}: stray config {mid}")),
                }
            }
        }
        for (device, mid) in expected.keys() {
            if devices.contains_key(device) && !seen.contains(&(device.clone(), mid.clone())) {
                out.push(format!("{device}: missing config {mid}"));
            }
        }
        for record in self.ledger.records() {
            if !self.intents.contains_key(&record.intent_id) {
                out.push(format!("reservation for unknown intent {}", record.intent_id));
            }
        }
        out
    }
}

fn event_name(event: &TopologyEvent) -> &'static str {
    match event.kind {
        TopologyEventKind::LinkDown => "LINK_DOWN",
        TopologyEventKind::LinkUp => "LINK_UP",
    }
}
