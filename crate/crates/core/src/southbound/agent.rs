use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::messages::{Payload, SouthboundMessage, Verb};
use crate::topology::{Mechanism, Node, NodeKind};

/// Observable configuration of one simulated device.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceState {
    pub device_id: String,
    /// Message id -> committed configuration.
    pub applied_configs: BTreeMap<String, Payload>,
    /// Message id -> prepared, not yet committed configuration.
    pub pending_configs: BTreeMap<String, Payload>,
    pub forwarding_table: Vec<ForwardingEntry>,
    pub up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForwardingEntry {
    pub service_id: String,
    pub in_port: String,
    pub dst_site: String,
    pub out_port: String,
    pub priority: u32,
}

impl DeviceState {
    pub fn new(device_id: &str) -> Self {
        Self {
            device_id: device_id.to_string(),
            up: true,
            ..Default::default()
        }
    }

    /// Configurations (applied or pending) belonging to `service_id`.
    pub fn configs_of<'a>(&'a self, service_id: &'a str) -> impl Iterator<Item = &'a Payload> + 'a {
        self.applied_configs
            .values()
            .chain(self.pending_configs.values())
            .filter(move |p| p.service_id() == service_id)
    }

    pub fn is_empty(&self) -> bool {
        self.applied_configs.is_empty() && self.pending_configs.is_empty()
    }

    fn rebuild_forwarding(&mut self) {
        let mut table: Vec<ForwardingEntry> = self
            .applied_configs
            .values()
            .filter_map(|p| match p {
                Payload::FlowRule(f) => Some(ForwardingEntry {
                    service_id: f.service_id.clone(),
                    in_port: f.in_port().unwrap_or_default().to_string(),
                    dst_site: f.dst_site().unwrap_or_default().to_string(),
                    out_port: f.output_port.clone(),
                    priority: f.priority,
                }),
                _ => None,
            })
            .collect();
        table.sort_by(|a, b| {
            (b.priority, &a.service_id, &a.in_port).cmp(&(a.priority, &b.service_id, &b.in_port))
        });
        self.forwarding_table = table;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    pub message_id: String,
    pub device_id: String,
    pub verb: Verb,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<DeviceState>,
}

impl Ack {
    fn ok(msg: &SouthboundMessage) -> Self {
        Self {
            message_id: msg.message_id.clone(),
            device_id: msg.device_id.clone(),
            verb: msg.verb,
            ok: true,
            reason: None,
            state: None,
        }
    }

    fn reject(msg: &SouthboundMessage, reason: impl Into<String>) -> Self {
        Self {
            ok: false,
            reason: Some(reason.into()),
            ..Self::ok(msg)
        }
    }
}

fn required_mechanism(payload: &Payload) -> Option<(Mechanism, u32)> {
    match payload {
        Payload::OpticalConnectionRequest(p) if p.encryption_flag => {
            Some((Mechanism::OtnAes, p.key_length_bits.unwrap_or(0)))
        }
        Payload::MacsecChannelConfig(p) => Some((Mechanism::Macsec, p.key_length_bits)),
        Payload::GreIpsecTunnelConfig(p) => Some((Mechanism::IpsecGre, p.key_length_bits)),
        _ => None,
    }
}

fn validate_prepare(profile: &Node, state: &DeviceState, payload: &Payload) -> Result<(), String> {
    match payload {
        Payload::OpticalConnectionRequest(req) => {
            if profile.kind != NodeKind::Transponder {
                return Err(format!("{} is not a transponder", profile.id));
            }
            let port = req.line_port();
            for other in state.applied_configs.values().chain(state.pending_configs.values()) {
                if let Payload::OpticalConnectionRequest(o) = other {
                    if o.line_port() == port && !o.same_lightpath(req) {
                        return Err(format!("line port {port} already carries another lightpath"));
                    }
                }
            }
        }
        Payload::MacsecChannelConfig(_) if profile.kind != NodeKind::EthSwitch => {
            return Err(format!("{} is not an Ethernet switch", profile.id));
        }
        Payload::GreIpsecTunnelConfig(_) if profile.kind != NodeKind::IpHost => {
            return Err(format!("{} is not an IP host", profile.id));
        }
        _ => {}
    }
    if let Some((mechanism, bits)) = required_mechanism(payload) {
        match profile.capability(mechanism) {
            Some(cap) if cap.key_length_bits >= bits => {}
            Some(cap) => {
                return Err(format!(
                    "{mechanism} limited to {} bits, {bits} requested",
                    cap.key_length_bits
                ))
            }
            None => return Err(format!("{} lacks {mechanism}", profile.id)),
        }
    }
    Ok(())
}

/// The device state machine. Pure: returns the reply and the next state.
pub fn handle_message(profile: &Node, state: &DeviceState, msg: &SouthboundMessage) -> (Ack, DeviceState) {
    let mut next = state.clone();
    let id = &msg.message_id;
    let ack = match msg.verb {
        Verb::Prepare => match &msg.payload {
            None => Ack::reject(msg, "PREPARE without payload"),
            Some(p) if state.applied_configs.get(id) == Some(p) || state.pending_configs.get(id) == Some(p) => {
                Ack::ok(msg)
            }
            Some(p) => match validate_prepare(profile, state, p) {
                Ok(()) => {
                    next.pending_configs.insert(id.clone(), p.clone());
                    Ack::ok(msg)
                }
                Err(reason) => Ack::reject(msg, reason),
            },
        },
        Verb::Commit => match next.pending_configs.remove(id) {
            Some(p) => {
                next.applied_configs.insert(id.clone(), p);
                next.rebuild_forwarding();
                Ack::ok(msg)
            }
            None if state.applied_configs.contains_key(id) => Ack::ok(msg),
            None => Ack::reject(msg, format!("nothing prepared under {id}")),
        },
        Verb::Abort => {
            next.pending_configs.remove(id);
            Ack::ok(msg)
        }
        Verb::Remove => {
            next.pending_configs.remove(id);
            if next.applied_configs.remove(id).is_some() {
                next.rebuild_forwarding();
            }
            Ack::ok(msg)
        }
        Verb::Query => Ack {
            state: Some(state.clone()),
            ..Ack::ok(msg)
        },
    };
    (ack, next)
}

/// Injected misbehaviour of one device.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceFaults {
    pub reject_prepare: bool,
    pub drop_commit: bool,
    pub down: bool,
}

impl DeviceFaults {
    /// Whether the device stays silent on this message.
    pub fn swallows(&self, verb: Verb) -> bool {
        self.down || (self.drop_commit && verb == Verb::Commit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad fault spec {0:?}: expected KIND=DEVICE with KIND one of REJECT_PREPARE, DROP_COMMIT, DOWN")]
pub struct FaultSpecError(String);

/// Per-device fault table, parsed from `KIND=DEVICE[,KIND=DEVICE...]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultConfig(pub BTreeMap<String, DeviceFaults>);

impl FaultConfig {
    pub const ENV_VAR: &'static str = "INFLIGHT_FAULTS";

    pub fn from_env() -> Result<Self, FaultSpecError> {
        std::env::var(Self::ENV_VAR).map_or(Ok(Self::default()), |s| s.parse())
    }

    pub fn get(&self, device: &str) -> DeviceFaults {
        self.0.get(device).copied().unwrap_or_default()
    }
}

impl FromStr for FaultConfig {
    type Err = FaultSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = FaultConfig::default();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (kind, device) = item.split_once('=').ok_or_else(|| FaultSpecError(item.to_string()))?;
            let entry = out.0.entry(device.trim().to_string()).or_default();
            match kind.trim() {
                "REJECT_PREPARE" => entry.reject_prepare = true,
                "DROP_COMMIT" => entry.drop_commit = true,
                "DOWN" => entry.down = true,
                _ => return Err(FaultSpecError(item.to_string())),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FaultConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (dev, faults) in &self.0 {
            if faults.reject_prepare {
                parts.push(format!("REJECT_PREPARE={dev}"));
            }
            if faults.drop_commit {
                parts.push(format!("DROP_COMMIT={dev}"));
            }
            if faults.down {
                parts.push(format!("DOWN={dev}"));
            }
        }
        f.write_str(&parts.join(","))
    }
}

/// A simulated device: its static profile, configuration state and faults.
#[derive(Debug, Clone)]
pub struct DeviceAgent {
    pub profile: Node,
    pub state: DeviceState,
    pub faults: DeviceFaults,
}

impl DeviceAgent {
    pub fn new(profile: Node) -> Self {
        let state = DeviceState::new(&profile.id);
        Self {
            profile,
            state,
            faults: DeviceFaults::default(),
        }
    }

    /// Processes one message; `None` models a lost reply.
    pub fn receive(&mut self, msg: &SouthboundMessage) -> Option<Ack> {
        if self.faults.swallows(msg.verb) {
            return None;
        }
        if self.faults.reject_prepare && msg.verb == Verb::Prepare {
            return Some(Ack::reject(msg, "prepare rejected by device"));
        }
        let (ack, next) = handle_message(&self.profile, &self.state, msg);
        self.state = next;
        Some(ack)
    }

    pub fn set_faults(&mut self, faults: DeviceFaults) {
        self.faults = faults;
        self.state.up = !faults.down;
    }
}
