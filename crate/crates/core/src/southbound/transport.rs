use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use super::agent::{Ack, DeviceAgent, DeviceFaults};
use super::messages::SouthboundMessage;
use crate::topology::{MultiLayerTopology, Node, NodeKind};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("no reply from {device} within {timeout_ms} ms")]
    Timeout { device: String, timeout_ms: u64 },
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("malformed reply from {device}: {reason}")]
    Malformed { device: String, reason: String },
}

/// Carries southbound messages to device agents.
pub trait Transport: Send {
    /// Delivers a batch; replies come back in batch order. Messages to
    /// different devices may be processed concurrently.
    fn dispatch(&mut self, batch: &[SouthboundMessage]) -> Vec<Result<Ack, TransportError>>;

    fn set_faults(&mut self, device: &str, faults: DeviceFaults) -> Result<(), TransportError>;

    fn devices(&self) -> Vec<String>;
}

/// Every topology node that accepts configuration. ROADMs are driven via
/// the transponders' optical requests and have no agent of their own.
pub fn agent_profiles(topology: &MultiLayerTopology) -> Vec<Node> {
    topology.nodes().filter(|n| n.kind != NodeKind::Roadm).cloned().collect()
}

/// In-process, synchronous transport. Lost replies fail immediately.
pub struct DirectTransport {
    agents: BTreeMap<String, DeviceAgent>,
}

impl DirectTransport {
    pub fn new(topology: &MultiLayerTopology) -> Self {
        Self {
            agents: agent_profiles(topology)
                .into_iter()
                .map(|n| (n.id.clone(), DeviceAgent::new(n)))
                .collect(),
        }
    }
}

impl Transport for DirectTransport {
    fn dispatch(&mut self, batch: &[SouthboundMessage]) -> Vec<Result<Ack, TransportError>> {
        batch
            .iter()
            .map(|msg| {
                let agent = self
                    .agents
                    .get_mut(&msg.device_id)
                    .ok_or_else(|| TransportError::UnknownDevice(msg.device_id.clone()))?;
                agent.receive(msg).ok_or_else(|| TransportError::Timeout {
                    device: msg.device_id.clone(),
                    timeout_ms: 0,
                })
            })
            .collect()
    }

    fn set_faults(&mut self, device: &str, faults: DeviceFaults) -> Result<(), TransportError> {
        let agent = self
            .agents
            .get_mut(device)
            .ok_or_else(|| TransportError::UnknownDevice(device.to_string()))?;
        agent.set_faults(faults);
        Ok(())
    }

    fn devices(&self) -> Vec<String> {
        self.agents.keys().cloned().collect()
    }
}

enum Envelope {
    /// A JSON-encoded message and where to send the JSON-encoded reply.
    Message(String, Sender<String>),
    Faults(DeviceFaults),
}

struct Actor {
    inbox: Sender<Envelope>,
    handle: Option<JoinHandle<()>>,
}

fn run_agent(mut agent: DeviceAgent, inbox: Receiver<Envelope>) {
    // Reply channels of swallowed messages stay open so the caller sees
    // silence (and times out) rather than a closed channel.
    let mut unanswered: Vec<Sender<String>> = Vec::new();
    for envelope in inbox {
        match envelope {
            Envelope::Faults(f) => agent.set_faults(f),
            Envelope::Message(line, reply) => {
                let msg: SouthboundMessage = match serde_json::from_str(&line) {
                    Ok(m) => m,
                    Err(e) => {
                        warn!("{}: undecodable message: {e}", agent.profile.id);
                        continue;
                    }
                };
                match agent.receive(&msg) {
                    Some(ack) => {
                        let encoded = serde_json::to_string(&ack).expect("ack serializes");
                        let _ = reply.send(encoded);
                    }
                    None => {
                        if unanswered.len() >= 1024 {
                            unanswered.drain(..512);
                        }
                        unanswered.push(reply);
                    }
                }
            }
        }
    }
}

/// One thread per device agent; messages and replies cross the thread
/// boundary as JSON lines, and a reply that does not arrive within the
/// timeout is a [`TransportError::Timeout`].
pub struct ActorTransport {
    actors: BTreeMap<String, Actor>,
    timeout: Duration,
}

impl ActorTransport {
    pub fn new(topology: &MultiLayerTopology, timeout: Duration) -> Self {
        let actors = agent_profiles(topology)
            .into_iter()
            .map(|node| {
                let (tx, rx) = mpsc::channel();
                let id = node.id.clone();
                let agent = DeviceAgent::new(node);
                let handle = thread::Builder::new()
                    .name(format!("agent-{id}"))
                    .spawn(move || run_agent(agent, rx))
                    .expect("spawn agent thread");
                (
                    id,
                    Actor {
                        inbox: tx,
                        handle: Some(handle),
                    },
                )
            })
            .collect();
        Self { actors, timeout }
    }
}

impl Transport for ActorTransport {
    fn dispatch(&mut self, batch: &[SouthboundMessage]) -> Vec<Result<Ack, TransportError>> {
        let pending: Vec<Result<Receiver<String>, TransportError>> = batch
            .iter()
            .map(|msg| {
                let actor = self
                    .actors
                    .get(&msg.device_id)
                    .ok_or_else(|| TransportError::UnknownDevice(msg.device_id.clone()))?;
                let (tx, rx) = mpsc::channel();
                let line = serde_json::to_string(msg).expect("message serializes");
                debug!("-> {line}");
                if actor.inbox.send(Envelope::Message(line, tx)).is_err() {
                    warn!("agent {} has stopped", msg.device_id);
                }
                Ok(rx)
            })
            .collect();
        let deadline = Instant::now() + self.timeout;
        pending
            .into_iter()
            .zip(batch)
            .map(|(rx, msg)| {
                let rx = rx?;
                let wait = deadline.saturating_duration_since(Instant::now());
                let timeout = || TransportError::Timeout {
                    device: msg.device_id.clone(),
                    timeout_ms: self.timeout.as_millis() as u64,
                };
                let line = match rx.recv_timeout(wait) {
                    Ok(l) => l,
                    Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => return Err(timeout()),
                };
                debug!("<- {line}");
                serde_json::from_str(&line).map_err(|e| TransportError::Malformed {
                    device: msg.device_id.clone(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    fn set_faults(&mut self, device: &str, faults: DeviceFaults) -> Result<(), TransportError> {
        let actor = self
            .actors
            .get(device)
            .ok_or_else(|| TransportError::UnknownDevice(device.to_string()))?;
        let _ = actor.inbox.send(Envelope::Faults(faults));
        Ok(())
    }

    fn devices(&self) -> Vec<String> {
        self.actors.keys().cloned().collect()
    }
}

impl Drop for ActorTransport {
    fn drop(&mut self) {
        let handles: Vec<_> = self
            .actors
            .values_mut()
            .filter_map(|a| a.handle.take())
            .collect();
        self.actors.clear();
        for h in handles {
            let _ = h.join();
        }
    }
}
