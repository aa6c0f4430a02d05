//! Multi-layer network model: ROADMs, transponders, Ethernet switches and IP
//! hosts joined by fibers, client attachments and inter-layer links.

mod document;
mod walk;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::ResourceLedger;

pub use document::{load_topology, TopologyDocument};
pub use walk::{access_legs, reachable_attachments, AccessLeg, Attachment, AttachmentMap};

/// Network layer, ordered from the physical layer upwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerId {
    #[serde(rename = "L0_OPTICAL")]
    L0Optical,
    #[serde(rename = "L2_ETHERNET")]
    L2Ethernet,
    #[serde(rename = "L3_IP")]
    L3Ip,
}

impl LayerId {
    pub const ALL: [LayerId; 3] = [LayerId::L0Optical, LayerId::L2Ethernet, LayerId::L3Ip];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerId::L0Optical => "L0_OPTICAL",
            LayerId::L2Ethernet => "L2_ETHERNET",
            LayerId::L3Ip => "L3_IP",
        }
    }

    pub fn parse(s: &str) -> Option<LayerId> {
        LayerId::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "OTN_AES")]
    OtnAes,
    #[serde(rename = "MACSEC")]
    Macsec,
    #[serde(rename = "IPSEC_GRE")]
    IpsecGre,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::OtnAes, Mechanism::Macsec, Mechanism::IpsecGre];

    /// The only layer a mechanism can operate at.
    pub fn layer(self) -> LayerId {
        match self {
            Mechanism::OtnAes => LayerId::L0Optical,
            Mechanism::Macsec => LayerId::L2Ethernet,
            Mechanism::IpsecGre => LayerId::L3Ip,
        }
    }

    pub fn for_layer(layer: LayerId) -> Mechanism {
        match layer {
            LayerId::L0Optical => Mechanism::OtnAes,
            LayerId::L2Ethernet => Mechanism::Macsec,
            LayerId::L3Ip => Mechanism::IpsecGre,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::OtnAes => "OTN_AES",
            Mechanism::Macsec => "MACSEC",
            Mechanism::IpsecGre => "IPSEC_GRE",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const KEY_LENGTHS: [u32; 2] = [128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncryptionCapability {
    pub layer: LayerId,
    pub mechanism: Mechanism,
    pub key_length_bits: u32,
}

impl EncryptionCapability {
    pub fn new(mechanism: Mechanism, key_length_bits: u32) -> Self {
        Self {
            layer: mechanism.layer(),
            mechanism,
            key_length_bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Roadm,
    Transponder,
    EthSwitch,
    IpHost,
}

impl NodeKind {
    pub fn layer(self) -> LayerId {
        match self {
            NodeKind::Roadm | NodeKind::Transponder => LayerId::L0Optical,
            NodeKind::EthSwitch => LayerId::L2Ethernet,
            NodeKind::IpHost => LayerId::L3Ip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub layer: LayerId,
    #[serde(default)]
    pub capabilities: Vec<EncryptionCapability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_id: Option<String>,
}

impl Node {
    pub fn capability(&self, mechanism: Mechanism) -> Option<&EncryptionCapability> {
        self.capabilities
            .iter()
            .filter(|c| c.mechanism == mechanism)
            .max_by_key(|c| c.key_length_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkKind {
    Fiber,
    ClientAttach,
    Transitional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkState {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Link {
    pub id: String,
    pub a_node: String,
    pub b_node: String,
    pub kind: LinkKind,
    pub capacity_mbps: u64,
    pub latency_ms: f64,
    #[serde(default = "default_state")]
    pub state: LinkState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_count: Option<u32>,
    /// Wavelength index -> occupying service id. Fibers only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lambda_occupancy: BTreeMap<u32, String>,
}

fn default_state() -> LinkState {
    LinkState::Up
}

impl Link {
    pub fn is_up(&self) -> bool {
        self.state == LinkState::Up
    }

    pub fn joins(&self, node: &str) -> bool {
        self.a_node == node || self.b_node == node
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other_end(&self, node: &str) -> Option<&str> {
        if self.a_node == node {
            Some(&self.b_node)
        } else if self.b_node == node {
            Some(&self.a_node)
        } else {
            None
        }
    }

    /// Latency in whole microseconds. Path latencies are summed in this unit
    /// so that comparisons never depend on float summation order.
    pub fn latency_us(&self) -> u64 {
        (self.latency_ms * 1000.0).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyDefaults {
    #[serde(default = "default_wavelength_count")]
    pub wavelength_count: u32,
    #[serde(default = "default_line_rate")]
    pub line_rate_mbps: u64,
}

fn default_wavelength_count() -> u32 {
    4
}

fn default_line_rate() -> u64 {
    10_000
}

impl Default for TopologyDefaults {
    fn default() -> Self {
        Self {
            wavelength_count: default_wavelength_count(),
            line_rate_mbps: default_line_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TopologyEventKind {
    LinkDown,
    LinkUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyEvent {
    pub kind: TopologyEventKind,
    pub link_id: String,
    #[serde(default)]
    pub sequence: u64,
}

impl TopologyEvent {
    pub fn link_down(link_id: impl Into<String>) -> Self {
        Self {
            kind: TopologyEventKind::LinkDown,
            link_id: link_id.into(),
            sequence: 0,
        }
    }

    pub fn link_up(link_id: impl Into<String>) -> Self {
        Self {
            kind: TopologyEventKind::LinkUp,
            link_id: link_id.into(),
            sequence: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violated at {element}: {reason}")]
    Invariant { element: String, reason: String },
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("unknown site {0}")]
    UnknownSite(String),
}

impl TopologyError {
    fn invariant(element: impl Into<String>, reason: impl Into<String>) -> Self {
        TopologyError::Invariant {
            element: element.into(),
            reason: reason.into(),
        }
    }
}

/// Validated multi-layer topology. Construct with [`load_topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerTopology {
    nodes: BTreeMap<String, Node>,
    links: BTreeMap<String, Link>,
    sites: BTreeMap<String, BTreeSet<String>>,
    defaults: TopologyDefaults,
    revision: u64,
}

impl MultiLayerTopology {
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn sites(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.sites
    }

    pub fn site(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.sites.get(id)
    }

    pub fn defaults(&self) -> TopologyDefaults {
        self.defaults
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Links touching `node`, in link-id order.
    pub fn links_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Link> + 'a {
        self.links.values().filter(move |l| l.joins(node))
    }

    /// The ROADM a transponder is attached to, with the attachment link.
    pub fn transponder_roadm(&self, transponder: &str) -> Option<(&Link, &str)> {
        self.links
            .values()
            .find(|l| l.kind == LinkKind::ClientAttach && l.joins(transponder))
            .and_then(|l| l.other_end(transponder).map(|r| (l, r)))
    }

    /// Which site (if any) lists `node` as a member.
    pub fn site_of(&self, node: &str) -> Option<&str> {
        self.sites
            .iter()
            .find(|(_, members)| members.contains(node))
            .map(|(s, _)| s.as_str())
    }

    pub fn wavelength_count(&self, link: &str) -> u32 {
        self.links
            .get(link)
            .and_then(|l| l.wavelength_count)
            .unwrap_or(self.defaults.wavelength_count)
    }

    /// Applies a link state change. Returns the services that depend on the
    /// link, as recorded in `ledger`. Only LINK_DOWN reports affected services;
    /// restoring a link never triggers re-optimization.
    pub fn apply_event(
        &mut self,
        event: &TopologyEvent,
        ledger: &ResourceLedger,
    ) -> Result<Vec<String>, TopologyError> {
        let link = self
            .links
            .get_mut(&event.link_id)
            .ok_or_else(|| TopologyError::UnknownLink(event.link_id.clone()))?;
        link.state = match event.kind {
            TopologyEventKind::LinkDown => LinkState::Down,
            TopologyEventKind::LinkUp => LinkState::Up,
        };
        self.revision += 1;
        Ok(match event.kind {
            TopologyEventKind::LinkDown => ledger.services_using_link(&event.link_id),
            TopologyEventKind::LinkUp => Vec::new(),
        })
    }

    /// Occupancy writes are owned by the resource ledger.
    pub(crate) fn set_occupancy(&mut self, link: &str, index: u32, owner: Option<&str>) {
        if let Some(l) = self.links.get_mut(link) {
            match owner {
                Some(o) => {
                    l.lambda_occupancy.insert(index, o.to_string());
                }
                None => {
                    l.lambda_occupancy.remove(&index);
                }
            }
        }
    }

    /// Serializable view of the structured content (without the revision).
    pub fn to_document(&self) -> TopologyDocument {
        TopologyDocument {
            nodes: self.nodes.values().cloned().collect(),
            links: self.links.values().cloned().collect(),
            sites: self
                .sites
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
            defaults: self.defaults,
        }
    }

    /// Checks the wavelength-occupancy soundness property; returns every violation.
    pub fn occupancy_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for link in self.links.values() {
            if link.kind != LinkKind::Fiber {
                if !link.lambda_occupancy.is_empty() {
                    out.push(format!("{}: occupancy on non-fiber link", link.id));
                }
                continue;
            }
            let count = self.wavelength_count(&link.id);
            if link.lambda_occupancy.len() > count as usize {
                out.push(format!("{}: more occupied wavelengths than exist", link.id));
            }
            for idx in link.lambda_occupancy.keys() {
                if *idx >= count {
                    out.push(format!("{}: wavelength {idx} out of range", link.id));
                }
            }
        }
        out
    }
}
