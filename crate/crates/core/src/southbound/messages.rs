//! Structured southbound message schema.
//!
//! One schema stands in for the three real protocols a deployment would use:
//! `OpticalConnectionRequest` abstracts a COP/YANG call to the optical
//! controller, `MacsecChannelConfig` and `GreIpsecTunnelConfig` abstract
//! OVSDB-style device configuration, and `FlowRule` abstracts an OpenFlow
//! flow-mod. Every payload carries the owning `serviceId` (an OpenFlow
//! cookie, in effect).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OpticalConnectionRequest {
    pub service_id: String,
    pub peer_transponder_id: String,
    /// ROADMs from this transponder's ROADM to the peer's.
    pub roadm_path: Vec<String>,
    /// Fibers in the same direction as `roadm_path`.
    pub fiber_path: Vec<String>,
    pub wavelength_index: u32,
    pub encryption_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_length_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_id: Option<String>,
}

impl OpticalConnectionRequest {
    /// Line-side degree: the first fiber leaving this transponder's ROADM,
    /// or `local` when both ends sit on the same ROADM.
    pub fn degree(&self) -> &str {
        self.fiber_path.first().map_or("local", String::as_str)
    }

    pub fn line_port(&self) -> String {
        line_port(self.wavelength_index, self.degree())
    }

    /// Two requests describe the same lightpath (and may share it) when they
    /// agree on everything but the owning service and key id.
    pub fn same_lightpath(&self, other: &OpticalConnectionRequest) -> bool {
        self.peer_transponder_id == other.peer_transponder_id
            && self.fiber_path == other.fiber_path
            && self.wavelength_index == other.wavelength_index
            && self.encryption_flag == other.encryption_flag
    }
}

pub fn line_port(wavelength: u32, degree: &str) -> String {
    format!("line:{wavelength}:{degree}")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MacsecChannelConfig {
    pub service_id: String,
    pub peer_switch_id: String,
    pub key_length_bits: u32,
    pub vlan_tag: u16,
    pub key_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GreIpsecTunnelConfig {
    pub service_id: String,
    /// Tunnel endpoint addresses; the simulated network addresses hosts by node id.
    pub local_addr: String,
    pub remote_addr: String,
    pub key_length_bits: u32,
    pub tunnel_id: u32,
    pub key_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlowRule {
    pub service_id: String,
    pub match_fields: BTreeMap<String, String>,
    pub output_port: String,
    pub priority: u32,
}

impl FlowRule {
    pub fn in_port(&self) -> Option<&str> {
        self.match_fields.get("inPort").map(String::as_str)
    }

    pub fn dst_site(&self) -> Option<&str> {
        self.match_fields.get("dstSite").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Payload {
    OpticalConnectionRequest(OpticalConnectionRequest),
    MacsecChannelConfig(MacsecChannelConfig),
    GreIpsecTunnelConfig(GreIpsecTunnelConfig),
    FlowRule(FlowRule),
}

impl Payload {
    pub fn kind(&self) -> OperationKind {
        match self {
            Payload::OpticalConnectionRequest(_) => OperationKind::OpticalConnection,
            Payload::MacsecChannelConfig(_) => OperationKind::MacsecChannel,
            Payload::GreIpsecTunnelConfig(_) => OperationKind::GreIpsecTunnel,
            Payload::FlowRule(_) => OperationKind::FlowRule,
        }
    }

    pub fn service_id(&self) -> &str {
        match self {
            Payload::OpticalConnectionRequest(p) => &p.service_id,
            Payload::MacsecChannelConfig(p) => &p.service_id,
            Payload::GreIpsecTunnelConfig(p) => &p.service_id,
            Payload::FlowRule(p) => &p.service_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperationKind {
    OpticalConnection,
    MacsecChannel,
    GreIpsecTunnel,
    FlowRule,
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperationKind::OpticalConnection => "OPTICAL_CONNECTION",
            OperationKind::MacsecChannel => "MACSEC_CHANNEL",
            OperationKind::GreIpsecTunnel => "GRE_IPSEC_TUNNEL",
            OperationKind::FlowRule => "FLOW_RULE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verb {
    Prepare,
    Commit,
    Abort,
    Remove,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SouthboundMessage {
    pub message_id: String,
    pub device_id: String,
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
}

impl SouthboundMessage {
    pub fn prepare(message_id: &str, device_id: &str, payload: Payload) -> Self {
        Self {
            message_id: message_id.to_string(),
            device_id: device_id.to_string(),
            verb: Verb::Prepare,
            payload: Some(payload),
        }
    }

    pub fn control(verb: Verb, message_id: &str, device_id: &str) -> Self {
        Self {
            message_id: message_id.to_string(),
            device_id: device_id.to_string(),
            verb,
            payload: None,
        }
    }
}
