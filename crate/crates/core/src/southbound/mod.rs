//! Southbound interface: device agents, the transports that reach them, and
//! two-phase installation of compiled services.

pub mod agent;
pub mod messages;
pub mod trace;
pub mod transport;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

pub use agent::{handle_message, Ack, DeviceAgent, DeviceFaults, DeviceState, FaultConfig, ForwardingEntry};
pub use messages::{SouthboundMessage, Verb};
pub use trace::{trace, TraceHop, TraceResult};
pub use transport::{ActorTransport, DirectTransport, Transport, TransportError, DEFAULT_TIMEOUT};

use crate::compiler::ServiceRecord;
use crate::topology::MultiLayerTopology;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstallReport {
    pub intent_id: String,
    pub generation: u32,
    pub installed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RemoveReport {
    pub intent_id: String,
    /// Devices that did not confirm removal.
    pub unreachable: Vec<String>,
}

/// Append-only record of every message and reply.
struct Journal(BufWriter<File>);

impl Journal {
    fn write<T: Serialize>(&mut self, direction: &str, item: &T) {
        let line = serde_json::json!({ "dir": direction, "body": item });
        if let Err(e) = writeln!(self.0, "{line}") {
            warn!("southbound journal: {e}");
        }
    }
}

pub struct Southbound {
    transport: Box<dyn Transport>,
    journal: Option<Journal>,
}

impl Southbound {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            journal: None,
        }
    }

    pub fn direct(topology: &MultiLayerTopology) -> Self {
        Self::new(Box::new(DirectTransport::new(topology)))
    }

    pub fn actors(topology: &MultiLayerTopology, timeout: Duration) -> Self {
        Self::new(Box::new(ActorTransport::new(topology, timeout)))
    }

    /// Mirrors all traffic into `path` as JSON lines.
    pub fn with_journal(mut self, path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.journal = Some(Journal(BufWriter::new(file)));
        Ok(self)
    }

    pub fn devices(&self) -> Vec<String> {
        self.transport.devices()
    }

    pub fn set_faults(&mut self, device: &str, faults: DeviceFaults) -> Result<(), TransportError> {
        self.transport.set_faults(device, faults)
    }

    pub fn apply_faults(&mut self, config: &FaultConfig) -> Result<(), TransportError> {
        for device in self.devices() {
            self.transport.set_faults(&device, config.get(&device))?;
        }
        Ok(())
    }

    pub fn dispatch(&mut self, batch: &[SouthboundMessage]) -> Vec<Result<Ack, TransportError>> {
        if let Some(j) = &mut self.journal {
            for m in batch {
                j.write("out", m);
            }
        }
        let replies = self.transport.dispatch(batch);
        if let Some(j) = &mut self.journal {
            for r in &replies {
                match r {
                    Ok(ack) => j.write("in", ack),
                    Err(e) => j.write("error", &e.to_string()),
                }
            }
            let _ = j.0.flush();
        }
        replies
    }

    fn control_all(&mut self, verb: Verb, record: &ServiceRecord) -> Vec<Result<Ack, TransportError>> {
        let batch: Vec<SouthboundMessage> = record
            .message_ids()
            .iter()
            .zip(&record.solution.operations)
            .map(|(id, op)| SouthboundMessage::control(verb, id, &op.device_id))
            .collect();
        self.dispatch(&batch)
    }

    /// Two-phase install: PREPARE everywhere, then COMMIT everywhere. Any
    /// rejection or silence during PREPARE aborts all devices; a failed
    /// COMMIT removes the service from every device again.
    pub fn install(&mut self, record: &ServiceRecord) -> InstallReport {
        let mut report = InstallReport {
            intent_id: record.intent_id.clone(),
            generation: record.generation,
            installed: false,
            failed_device: None,
            reason: None,
        };
        let prepares: Vec<SouthboundMessage> = record
            .message_ids()
            .iter()
            .zip(&record.solution.operations)
            .map(|(id, op)| SouthboundMessage::prepare(id, &op.device_id, op.params.clone()))
            .collect();

        let replies = self.dispatch(&prepares);
        if let Some((device, reason)) = first_failure(&prepares, &replies) {
            self.control_all(Verb::Abort, record);
            report.failed_device = Some(device);
            report.reason = Some(reason);
            return report;
        }

        let commits: Vec<SouthboundMessage> = prepares
            .iter()
            .map(|m| SouthboundMessage::control(Verb::Commit, &m.message_id, &m.device_id))
            .collect();
        let replies = self.dispatch(&commits);
        if let Some((device, reason)) = first_failure(&commits, &replies) {
            self.control_all(Verb::Remove, record);
            report.failed_device = Some(device);
            report.reason = Some(reason);
            return report;
        }
        report.installed = true;
        report
    }

    /// Removes every operation of the record. Idempotent.
    pub fn remove(&mut self, record: &ServiceRecord) -> RemoveReport {
        let replies = self.control_all(Verb::Remove, record);
        let mut unreachable: Vec<String> = replies
            .iter()
            .zip(&record.solution.operations)
            .filter(|(r, _)| !r.as_ref().is_ok_and(|a| a.ok))
            .map(|(_, op)| op.device_id.clone())
            .collect();
        unreachable.dedup();
        RemoveReport {
            intent_id: record.intent_id.clone(),
            unreachable,
        }
    }

    pub fn query(&mut self, device: &str) -> Result<DeviceState, TransportError> {
        let msg = SouthboundMessage::control(Verb::Query, &format!("query/{device}"), device);
        let reply = self.dispatch(std::slice::from_ref(&msg)).remove(0)?;
        reply.state.ok_or_else(|| TransportError::Malformed {
            device: device.to_string(),
            reason: "QUERY reply without state".into(),
        })
    }

    /// Current state of every reachable device.
    pub fn snapshot(&mut self) -> BTreeMap<String, DeviceState> {
        let devices = self.devices();
        let batch: Vec<SouthboundMessage> = devices
            .iter()
            .map(|d| SouthboundMessage::control(Verb::Query, &format!("query/{d}"), d))
            .collect();
        self.dispatch(&batch)
            .into_iter()
            .filter_map(|r| r.ok().and_then(|a| a.state))
            .map(|s| (s.device_id.clone(), s))
            .collect()
    }
}

fn first_failure(
    batch: &[SouthboundMessage],
    replies: &[Result<Ack, TransportError>],
) -> Option<(String, String)> {
    batch.iter().zip(replies).find_map(|(m, r)| match r {
        Ok(a) if a.ok => None,
        Ok(a) => Some((
            m.device_id.clone(),
            a.reason.clone().unwrap_or_else(|| "rejected".into()),
        )),
        Err(e) => Some((m.device_id.clone(), e.to_string())),
    })
}
