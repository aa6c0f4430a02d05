use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::search::Hit;
use super::{AppCentricIntent, CandidateSolution, NetworkOperation, ResourceLedger};
use crate::southbound::messages::{
    FlowRule, GreIpsecTunnelConfig, MacsecChannelConfig, OpticalConnectionRequest, Payload,
};
use crate::topology::{AccessLeg, Mechanism};

pub const FLOW_PRIORITY: u32 = 100;
const FIRST_VLAN: u16 = 100;
const FIRST_TUNNEL: u32 = 1;

/// Deterministic key handle: first 8 bytes of sha256 over the service identity.
pub(crate) fn key_id(intent_id: &str, mechanism: Mechanism, wavelength: u32, fibers: &[String]) -> String {
    let digest = Sha256::digest(format!("{intent_id}|{}|{wavelength}|{}", mechanism.as_str(), fibers.join(",")));
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn vlans_in_use(ledger: &ResourceLedger, devices: &[&str]) -> BTreeSet<u16> {
    ledger
        .records()
        .flat_map(|r| r.solution.operations.iter())
        .filter_map(|op| match &op.params {
            Payload::MacsecChannelConfig(m) if devices.contains(&op.device_id.as_str()) => Some(m.vlan_tag),
            _ => None,
        })
        .collect()
}

fn tunnels_in_use(ledger: &ResourceLedger, devices: &[&str]) -> BTreeSet<u32> {
    ledger
        .records()
        .flat_map(|r| r.solution.operations.iter())
        .filter_map(|op| match &op.params {
            Payload::GreIpsecTunnelConfig(g) if devices.contains(&op.device_id.as_str()) => Some(g.tunnel_id),
            _ => None,
        })
        .collect()
}

/// Flow entries along one access leg, site device first. Traffic enters
/// each device on the previous leg link and leaves on the next one; the
/// transponder sends it to its line port.
fn leg_flows(intent_id: &str, leg: &AccessLeg, remote_site: &str, line: &str) -> Vec<NetworkOperation> {
    leg.nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let in_port = if i == 0 { "local".to_string() } else { leg.links[i - 1].clone() };
            let output_port = leg.links.get(i).cloned().unwrap_or_else(|| line.to_string());
            NetworkOperation::new(
                node.clone(),
                Payload::FlowRule(FlowRule {
                    service_id: intent_id.to_string(),
                    match_fields: BTreeMap::from([
                        ("inPort".to_string(), in_port),
                        ("dstSite".to_string(), remote_site.to_string()),
                    ]),
                    output_port,
                    priority: FLOW_PRIORITY,
                }),
            )
        })
        .collect()
}

pub(super) fn build_solution(
    aci: &AppCentricIntent,
    ledger: &ResourceLedger,
    hit: Hit,
) -> CandidateSolution {
    let Hit {
        route,
        wavelength,
        groomed,
    } = hit;
    let id = aci.intent_id.as_str();
    let fibers = &route.path.fibers;
    let src_t = route.src_leg.transponder().to_string();
    let dst_t = route.dst_leg.transponder().to_string();
    let optical_encryption = route.wants_optical_encryption();
    let otn_key = optical_encryption.then(|| key_id(id, Mechanism::OtnAes, wavelength, fibers));

    let reversed_fibers: Vec<String> = fibers.iter().rev().cloned().collect();
    let mut reversed_roadms = route.path.roadms.clone();
    reversed_roadms.reverse();
    let optical = |peer: &str, roadms: Vec<String>, fiber_path: Vec<String>| OpticalConnectionRequest {
        service_id: id.to_string(),
        peer_transponder_id: peer.to_string(),
        roadm_path: roadms,
        fiber_path,
        wavelength_index: wavelength,
        encryption_flag: optical_encryption,
        key_length_bits: if optical_encryption { route.key_bits } else { None },
        key_id: otn_key.clone(),
    };
    let src_optical = optical(&dst_t, route.path.roadms.clone(), fibers.clone());
    let dst_optical = optical(&src_t, reversed_roadms, reversed_fibers);
    let src_line = src_optical.line_port();
    let dst_line = dst_optical.line_port();

    let mut operations = vec![
        NetworkOperation::new(src_t.clone(), Payload::OpticalConnectionRequest(src_optical)),
        NetworkOperation::new(dst_t.clone(), Payload::OpticalConnectionRequest(dst_optical)),
    ];

    let endpoints = route
        .src_endpoint
        .zip(route.dst_endpoint)
        .map(|(s, d)| (route.src_leg.nodes[s].clone(), route.dst_leg.nodes[d].clone()));
    match (route.mechanism, endpoints, route.key_bits) {
        (Some(Mechanism::Macsec), Some((a, b)), Some(bits)) => {
            let used = vlans_in_use(ledger, &[&a, &b]);
            let vlan = (FIRST_VLAN..).find(|v| !used.contains(v)).expect("vlan space");
            let key = key_id(id, Mechanism::Macsec, wavelength, fibers);
            for (dev, peer) in [(&a, &b), (&b, &a)] {
                operations.push(NetworkOperation::new(
                    dev.clone(),
                    Payload::MacsecChannelConfig(MacsecChannelConfig {
                        service_id: id.to_string(),
                        peer_switch_id: peer.clone(),
                        key_length_bits: bits,
                        vlan_tag: vlan,
                        key_id: key.clone(),
                    }),
                ));
            }
        }
        (Some(Mechanism::IpsecGre), Some((a, b)), Some(bits)) => {
            let used = tunnels_in_use(ledger, &[&a, &b]);
            let tunnel = (FIRST_TUNNEL..).find(|t| !used.contains(t)).expect("tunnel space");
            let key = key_id(id, Mechanism::IpsecGre, wavelength, fibers);
            for (dev, peer) in [(&a, &b), (&b, &a)] {
                operations.push(NetworkOperation::new(
                    dev.clone(),
                    Payload::GreIpsecTunnelConfig(GreIpsecTunnelConfig {
                        service_id: id.to_string(),
                        local_addr: dev.clone(),
                        remote_addr: peer.clone(),
                        key_length_bits: bits,
                        tunnel_id: tunnel,
                        key_id: key.clone(),
                    }),
                ));
            }
        }
        _ => {}
    }

    operations.extend(leg_flows(id, &route.src_leg, &aci.dst_site, &src_line));
    operations.extend(leg_flows(id, &route.dst_leg, &aci.src_site, &dst_line));

    let overlay_path = route.overlay_links().cloned().collect();
    CandidateSolution {
        layer: route.layer,
        mechanism: route.mechanism,
        src_site: aci.src_site.clone(),
        dst_site: aci.dst_site.clone(),
        src_leg: route.src_leg,
        dst_leg: route.dst_leg,
        roadm_path: route.path.roadms,
        optical_path: route.path.fibers,
        wavelength_index: wavelength,
        overlay_path,
        total_latency_ms: route.latency_us as f64 / 1000.0,
        bandwidth_mbps: aci.bandwidth_mbps,
        key_length_bits: route.key_bits,
        groomed,
        operations,
    }
}
