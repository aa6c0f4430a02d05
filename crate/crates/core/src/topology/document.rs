use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    LinkKind, Link, MultiLayerTopology, Node, NodeKind, TopologyDefaults, TopologyError,
    KEY_LENGTHS,
};

/// On-disk topology file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default)]
    pub sites: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub defaults: TopologyDefaults,
}

/// Parses and validates a topology file. The result starts at revision 0.
pub fn load_topology(document: &str) -> Result<MultiLayerTopology, TopologyError> {
    let doc: TopologyDocument =
        serde_json::from_str(document).map_err(|e| TopologyError::Schema(e.to_string()))?;
    MultiLayerTopology::from_document(doc)
}

impl MultiLayerTopology {
    pub fn from_document(doc: TopologyDocument) -> Result<Self, TopologyError> {
        let defaults = doc.defaults;
        if defaults.wavelength_count == 0 {
            return Err(TopologyError::invariant("defaults.wavelengthCount", "must be positive"));
        }
        if defaults.line_rate_mbps == 0 {
            return Err(TopologyError::invariant("defaults.lineRateMbps", "must be positive"));
        }

        let mut nodes = BTreeMap::new();
        for node in doc.nodes {
            validate_node(&node)?;
            let id = node.id.clone();
            if nodes.insert(id.clone(), node).is_some() {
                return Err(TopologyError::invariant(id, "duplicate node id"));
            }
        }

        let mut links = BTreeMap::new();
        for mut link in doc.links {
            validate_link(&mut link, &nodes, &defaults)?;
            let id = link.id.clone();
            if links.insert(id.clone(), link).is_some() {
                return Err(TopologyError::invariant(id, "duplicate link id"));
            }
        }

        for node in nodes.values().filter(|n| n.kind == NodeKind::Transponder) {
            let attaches = links
                .values()
                .filter(|l: &&Link| l.kind == LinkKind::ClientAttach && l.joins(&node.id))
                .count();
            if attaches > 1 {
                return Err(TopologyError::invariant(
                    &node.id,
                    "transponder has more than one CLIENT_ATTACH link",
                ));
            }
        }

        let mut sites: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut member_of: BTreeMap<&str, &str> = BTreeMap::new();
        for (site, members) in &doc.sites {
            let set = sites.entry(site.clone()).or_default();
            for m in members {
                let node = nodes.get(m).ok_or_else(|| {
                    TopologyError::invariant(format!("sites.{site}"), format!("unknown node {m}"))
                })?;
                match node.kind {
                    NodeKind::Roadm => {
                        return Err(TopologyError::invariant(
                            format!("sites.{site}"),
                            format!("ROADM {m} cannot be a site member"),
                        ))
                    }
                    NodeKind::EthSwitch | NodeKind::IpHost
                        if node.site_id.as_deref() != Some(site.as_str()) =>
                    {
                        return Err(TopologyError::invariant(
                            m,
                            format!("listed in site {site} but siteId is {:?}", node.site_id),
                        ))
                    }
                    _ => {}
                }
                if let Some(prev) = member_of.insert(m.as_str(), site.as_str()) {
                    return Err(TopologyError::invariant(
                        m,
                        format!("member of both {prev} and {site}"),
                    ));
                }
                set.insert(m.clone());
            }
        }
        for node in nodes.values() {
            if let Some(site) = &node.site_id {
                if !sites.get(site).is_some_and(|s| s.contains(&node.id)) {
                    return Err(TopologyError::invariant(
                        &node.id,
                        format!("siteId {site} does not list this node"),
                    ));
                }
            }
        }

        Ok(Self {
            nodes,
            links,
            sites,
            defaults,
            revision: 0,
        })
    }
}

fn validate_node(node: &Node) -> Result<(), TopologyError> {
    if node.id.is_empty() {
        return Err(TopologyError::invariant("nodes", "empty node id"));
    }
    if node.layer != node.kind.layer() {
        return Err(TopologyError::invariant(
            &node.id,
            format!("layer {} does not match kind {:?}", node.layer, node.kind),
        ));
    }
    for cap in &node.capabilities {
        if cap.layer != cap.mechanism.layer() {
            return Err(TopologyError::invariant(
                &node.id,
                format!("{} capability declared at {}", cap.mechanism, cap.layer),
            ));
        }
        if cap.layer != node.layer {
            return Err(TopologyError::invariant(
                &node.id,
                format!("{} capability on a {} node", cap.mechanism, node.layer),
            ));
        }
        if !KEY_LENGTHS.contains(&cap.key_length_bits) {
            return Err(TopologyError::invariant(
                &node.id,
                format!("key length {} not in {{128, 256}}", cap.key_length_bits),
            ));
        }
    }
    if node.site_id.is_some() && !matches!(node.kind, NodeKind::EthSwitch | NodeKind::IpHost) {
        return Err(TopologyError::invariant(
            &node.id,
            "siteId is only allowed on ETH_SWITCH and IP_HOST",
        ));
    }
    Ok(())
}

fn validate_link(
    link: &mut Link,
    nodes: &BTreeMap<String, Node>,
    defaults: &TopologyDefaults,
) -> Result<(), TopologyError> {
    let a = nodes
        .get(&link.a_node)
        .ok_or_else(|| TopologyError::invariant(&link.id, format!("unknown node {}", link.a_node)))?;
    let b = nodes
        .get(&link.b_node)
        .ok_or_else(|| TopologyError::invariant(&link.id, format!("unknown node {}", link.b_node)))?;
    if a.id == b.id {
        return Err(TopologyError::invariant(&link.id, "self loop"));
    }
    if link.capacity_mbps == 0 {
        return Err(TopologyError::invariant(&link.id, "capacityMbps must be positive"));
    }
    if !link.latency_ms.is_finite() || link.latency_ms < 0.0 {
        return Err(TopologyError::invariant(&link.id, "latencyMs must be non-negative"));
    }

    use NodeKind::*;
    let kinds = (a.kind, b.kind);
    let ok = match link.kind {
        LinkKind::Fiber => kinds == (Roadm, Roadm),
        LinkKind::ClientAttach => matches!(kinds, (Transponder, Roadm) | (Roadm, Transponder)),
        LinkKind::Transitional => matches!(
            kinds,
            (Transponder, EthSwitch | IpHost)
                | (EthSwitch | IpHost, Transponder)
                | (EthSwitch, IpHost)
                | (IpHost, EthSwitch)
        ),
    };
    if !ok {
        return Err(TopologyError::invariant(
            &link.id,
            format!("{:?} link cannot join {:?} and {:?}", link.kind, a.kind, b.kind),
        ));
    }

    if link.kind == LinkKind::Fiber {
        let count = *link.wavelength_count.get_or_insert(defaults.wavelength_count);
        if count == 0 {
            return Err(TopologyError::invariant(&link.id, "wavelengthCount must be positive"));
        }
        if let Some(idx) = link.lambda_occupancy.keys().find(|i| **i >= count) {
            return Err(TopologyError::invariant(
                &link.id,
                format!("occupied wavelength {idx} >= wavelengthCount {count}"),
            ));
        }
    } else if link.wavelength_count.is_some() || !link.lambda_occupancy.is_empty() {
        return Err(TopologyError::invariant(
            &link.id,
            "wavelength fields are only allowed on FIBER links",
        ));
    }
    Ok(())
}
