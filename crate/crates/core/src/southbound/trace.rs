use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::agent::DeviceState;
use super::messages::{OpticalConnectionRequest, Payload};
use crate::topology::{Mechanism, MultiLayerTopology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceHop {
    /// Device the packet leaves.
    pub device_id: String,
    pub link_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encrypted_by: Option<Mechanism>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceResult {
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_id: Option<String>,
    pub hops: Vec<TraceHop>,
    pub reached_destination: bool,
    /// Non-intra-site links crossed in clear text.
    pub uncovered_links: Vec<String>,
}

const MAX_HOPS: usize = 256;

fn flows<'a>(state: &'a DeviceState, service: &'a str) -> impl Iterator<Item = &'a super::messages::FlowRule> + 'a {
    state.applied_configs.values().filter_map(move |p| match p {
        Payload::FlowRule(f) if f.service_id == service => Some(f),
        _ => None,
    })
}

fn optical_on<'a>(state: &'a DeviceState, service: &str, port: &str) -> Option<&'a OpticalConnectionRequest> {
    state.applied_configs.values().find_map(|p| match p {
        Payload::OpticalConnectionRequest(o) if o.service_id == service && o.line_port() == port => Some(o),
        _ => None,
    })
}

/// Mechanism terminated at `device` for `service`, and its peer device.
fn overlay_peer(state: &DeviceState, service: &str) -> Option<(Mechanism, String)> {
    state.applied_configs.values().find_map(|p| match p {
        Payload::MacsecChannelConfig(m) if m.service_id == service => Some((Mechanism::Macsec, m.peer_switch_id.clone())),
        Payload::GreIpsecTunnelConfig(g) if g.service_id == service => {
            Some((Mechanism::IpsecGre, g.remote_addr.clone()))
        }
        _ => None,
    })
}

/// Follows installed forwarding state from `src` to `dst`, one link at a
/// time, and reports which links some installed encryption covers.
///
/// The walk starts at a source-site device holding a flow for `dst` that
/// accepts locally originated traffic. Past the optical core, the far leg
/// only has flows for the reverse direction; those are followed backwards.
pub fn trace(
    topology: &MultiLayerTopology,
    devices: &BTreeMap<String, DeviceState>,
    src: &str,
    dst: &str,
) -> TraceResult {
    let mut result = TraceResult {
        src: src.to_string(),
        dst: dst.to_string(),
        service_id: None,
        hops: Vec::new(),
        reached_destination: false,
        uncovered_links: Vec::new(),
    };
    let empty = Default::default();
    let src_members = topology.site(src).unwrap_or(&empty);
    let dst_members = topology.site(dst).unwrap_or(&empty);

    let start = src_members.iter().find_map(|d| {
        let state = devices.get(d)?;
        state.applied_configs.values().find_map(|p| match p {
            Payload::FlowRule(f) if f.in_port() == Some("local") && f.dst_site() == Some(dst) => {
                Some((d.clone(), f.service_id.clone(), f.output_port.clone()))
            }
            _ => None,
        })
    });
    let Some((mut here, service, mut out)) = start else {
        return result;
    };
    result.service_id = Some(service.clone());
    let mut path_nodes = vec![here.clone()];
    let mut otn: Vec<bool> = Vec::new();

    while result.hops.len() < MAX_HOPS {
        if out == "local" {
            result.reached_destination = dst_members.contains(&here);
            break;
        }
        let Some(state) = devices.get(&here) else { break };
        let arrival;
        if out.starts_with("line:") {
            let Some(req) = optical_on(state, &service, &out) else { break };
            let peer = req.peer_transponder_id.clone();
            let Some(peer_state) = devices.get(&peer) else { break };
            let back_port = super::messages::line_port(
                req.wavelength_index,
                req.fiber_path.last().map_or("local", String::as_str),
            );
            let Some(peer_req) = optical_on(peer_state, &service, &back_port) else { break };
            if peer_req.peer_transponder_id != here {
                break;
            }
            let encrypted = req.encryption_flag && peer_req.encryption_flag;
            let Some((near_ca, near_roadm)) = topology.transponder_roadm(&here) else { break };
            let Some((far_ca, _)) = topology.transponder_roadm(&peer) else { break };
            let mut segment = vec![(here.clone(), near_ca.id.clone())];
            let mut at = near_roadm.to_string();
            for fiber in &req.fiber_path {
                segment.push((at.clone(), fiber.clone()));
                at = topology
                    .link(fiber)
                    .and_then(|l| l.other_end(&at))
                    .unwrap_or_default()
                    .to_string();
            }
            segment.push((at, far_ca.id.clone()));
            for (dev, link) in segment {
                result.hops.push(TraceHop {
                    device_id: dev,
                    link_id: link,
                    encrypted_by: None,
                });
                otn.push(encrypted);
            }
            for r in req.roadm_path.iter() {
                path_nodes.push(r.clone());
            }
            here = peer;
            path_nodes.push(here.clone());
            arrival = back_port;
        } else {
            let Some(link) = topology.link(&out) else { break };
            let Some(next) = link.other_end(&here) else { break };
            result.hops.push(TraceHop {
                device_id: here.clone(),
                link_id: out.clone(),
                encrypted_by: None,
            });
            otn.push(false);
            here = next.to_string();
            path_nodes.push(here.clone());
            arrival = out.clone();
        }

        let Some(state) = devices.get(&here) else { break };
        let forward = flows(state, &service)
            .find(|f| f.in_port() == Some(arrival.as_str()) && f.dst_site() == Some(dst))
            .map(|f| f.output_port.clone());
        let backward = || {
            flows(state, &service)
                .find(|f| f.output_port == arrival && f.dst_site() == Some(src))
                .and_then(|f| f.in_port().map(str::to_string))
        };
        match forward.or_else(backward) {
            Some(next_out) => out = next_out,
            None => break,
        }
    }

    for (hop, encrypted) in result.hops.iter_mut().zip(&otn) {
        if *encrypted {
            hop.encrypted_by = Some(Mechanism::OtnAes);
        }
    }
    // path_nodes[i] is the device sending hops[i]; overlay tunnels cover
    // every hop between two reciprocal endpoints.
    for (i, node) in path_nodes.iter().enumerate() {
        let Some((mech, peer)) = devices.get(node).and_then(|s| overlay_peer(s, &service)) else {
            continue;
        };
        let Some(j) = path_nodes.iter().skip(i + 1).position(|n| *n == peer).map(|p| p + i + 1) else {
            continue;
        };
        let reciprocal = devices
            .get(&peer)
            .and_then(|s| overlay_peer(s, &service))
            .is_some_and(|(m, p)| m == mech && &p == node);
        if reciprocal {
            for hop in result.hops.iter_mut().take(j).skip(i) {
                hop.encrypted_by.get_or_insert(mech);
            }
        }
    }

    for hop in &result.hops {
        if hop.encrypted_by.is_some() {
            continue;
        }
        let intra_site = topology.link(&hop.link_id).is_some_and(|l| {
            topology.site_of(&l.a_node).is_some() && topology.site_of(&l.a_node) == topology.site_of(&l.b_node)
        });
        if !intra_site && !result.uncovered_links.contains(&hop.link_id) {
            result.uncovered_links.push(hop.link_id.clone());
        }
    }
    result
}
