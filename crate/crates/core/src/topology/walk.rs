use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{EncryptionCapability, LayerId, LinkKind, MultiLayerTopology, NodeKind, TopologyError};

/// A device a site can terminate traffic on, with one of its encryption
/// capabilities (or none).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Attachment {
    pub node_id: String,
    pub capability: Option<EncryptionCapability>,
}

/// Per-layer attachment sets. Every layer is present as a key.
pub type AttachmentMap = BTreeMap<LayerId, Vec<Attachment>>;

/// Lists, per layer, the devices reachable from a site's own devices over
/// UP inter-layer links. The walk stops at transponders: their line side
/// belongs to the optical network, not to the site.
pub fn reachable_attachments(
    topology: &MultiLayerTopology,
    site_id: &str,
) -> Result<AttachmentMap, TopologyError> {
    let members = topology
        .site(site_id)
        .ok_or_else(|| TopologyError::UnknownSite(site_id.to_string()))?;

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = members.iter().map(String::as_str).collect();
    while let Some(id) = queue.pop_front() {
        if !seen.insert(id) {
            continue;
        }
        let Some(node) = topology.node(id) else { continue };
        if node.kind == NodeKind::Transponder {
            continue;
        }
        for link in topology.links_of(id) {
            if link.kind == LinkKind::Transitional && link.is_up() {
                if let Some(next) = link.other_end(id) {
                    queue.push_back(next);
                }
            }
        }
    }

    let mut map: AttachmentMap = LayerId::ALL.iter().map(|l| (*l, Vec::new())).collect();
    for id in seen {
        let Some(node) = topology.node(id) else { continue };
        if node.kind == NodeKind::Roadm {
            continue;
        }
        let entry = map.entry(node.layer).or_default();
        if node.capabilities.is_empty() {
            entry.push(Attachment {
                node_id: id.to_string(),
                capability: None,
            });
        } else {
            entry.extend(node.capabilities.iter().map(|c| Attachment {
                node_id: id.to_string(),
                capability: Some(*c),
            }));
        }
    }
    for v in map.values_mut() {
        v.sort();
        v.dedup();
    }
    Ok(map)
}

/// A usable way from a site device down to the optical layer: a chain of
/// TRANSITIONAL links ending at a transponder, plus that transponder's
/// CLIENT_ATTACH link to its ROADM. All links are UP.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessLeg {
    /// Site device first, transponder last.
    pub nodes: Vec<String>,
    /// TRANSITIONAL links in the same direction as `nodes`.
    pub links: Vec<String>,
    pub client_attach: String,
    pub roadm: String,
}

impl AccessLeg {
    pub fn transponder(&self) -> &str {
        self.nodes.last().expect("leg has at least one node")
    }

    pub fn site_device(&self) -> &str {
        &self.nodes[0]
    }

    pub fn latency_us(&self, topology: &MultiLayerTopology) -> u64 {
        self.links
            .iter()
            .chain(std::iter::once(&self.client_attach))
            .filter_map(|l| topology.link(l))
            .map(|l| l.latency_us())
            .sum()
    }
}

/// Every simple access leg of a site, in deterministic order.
pub fn access_legs(topology: &MultiLayerTopology, site_id: &str) -> Vec<AccessLeg> {
    let Some(members) = topology.site(site_id) else {
        return Vec::new();
    };
    let mut legs = Vec::new();
    for start in members {
        let mut nodes = vec![start.clone()];
        let mut links = Vec::new();
        extend_legs(topology, &mut nodes, &mut links, &mut legs);
    }
    legs.sort();
    legs
}

fn extend_legs(
    topology: &MultiLayerTopology,
    nodes: &mut Vec<String>,
    links: &mut Vec<String>,
    out: &mut Vec<AccessLeg>,
) {
    let here = nodes.last().cloned().expect("non-empty");
    let Some(node) = topology.node(&here) else { return };
    if node.kind == NodeKind::Transponder {
        if let Some((attach, roadm)) = topology.transponder_roadm(&here) {
            if attach.is_up() {
                out.push(AccessLeg {
                    nodes: nodes.clone(),
                    links: links.clone(),
                    client_attach: attach.id.clone(),
                    roadm: roadm.to_string(),
                });
            }
        }
        return;
    }
    for link in topology.links_of(&here) {
        if link.kind != LinkKind::Transitional || !link.is_up() {
            continue;
        }
        let Some(next) = link.other_end(&here) else { continue };
        if nodes.iter().any(|n| n == next) {
            continue;
        }
        nodes.push(next.to_string());
        links.push(link.id.clone());
        extend_legs(topology, nodes, links, out);
        nodes.pop();
        links.pop();
    }
}
