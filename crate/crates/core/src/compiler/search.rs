use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{AppCentricIntent, CandidateReport, RejectReason, ResourceLedger, MAX_PATHS_DEFAULT};
use crate::compiler::LightpathKey;
use crate::intent::ComplianceProfileTable;
use crate::topology::access_legs;
use crate::topology::{AccessLeg, AttachmentMap, LayerId, LinkKind, Mechanism, MultiLayerTopology};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FiberPath {
    pub roadms: Vec<String>,
    pub fibers: Vec<String>,
}

/// All simple paths between two ROADMs over UP fibers, unordered. A ROADM
/// to itself yields the single empty path.
pub fn simple_fiber_paths(topology: &MultiLayerTopology, from: &str, to: &str) -> Vec<FiberPath> {
    let mut out = Vec::new();
    let mut path = FiberPath {
        roadms: vec![from.to_string()],
        fibers: Vec::new(),
    };
    dfs(topology, to, &mut path, &mut out);
    out
}

fn dfs(topology: &MultiLayerTopology, to: &str, path: &mut FiberPath, out: &mut Vec<FiberPath>) {
    let here = path.roadms.last().cloned().expect("non-empty");
    if here == to {
        out.push(path.clone());
        return;
    }
    for link in topology.links_of(&here) {
        if link.kind != LinkKind::Fiber || !link.is_up() {
            continue;
        }
        let Some(next) = link.other_end(&here) else { continue };
        if path.roadms.iter().any(|r| r == next) {
            continue;
        }
        path.roadms.push(next.to_string());
        path.fibers.push(link.id.clone());
        dfs(topology, to, path, out);
        path.roadms.pop();
        path.fibers.pop();
    }
}

/// A concrete way to carry the service, before a wavelength is chosen.
#[derive(Debug, Clone)]
pub(super) struct Route {
    pub layer: LayerId,
    pub mechanism: Option<Mechanism>,
    pub src_leg: AccessLeg,
    pub dst_leg: AccessLeg,
    /// Index into the leg's nodes of the device terminating encryption.
    pub src_endpoint: Option<usize>,
    pub dst_endpoint: Option<usize>,
    pub key_bits: Option<u32>,
    pub path: FiberPath,
    pub latency_us: u64,
    pub links: Vec<String>,
    pub unprotected: Option<String>,
}

impl Route {
    pub fn wants_optical_encryption(&self) -> bool {
        self.layer == LayerId::L0Optical && self.mechanism.is_some()
    }

    pub fn overlay_links(&self) -> impl Iterator<Item = &String> {
        self.src_leg.links.iter().chain(self.dst_leg.links.iter().rev())
    }

    fn report(&self, wavelength: u32, verdict: &Result<bool, RejectReason>) -> CandidateReport {
        CandidateReport {
            layer: self.layer,
            mechanism: self.mechanism,
            src_transponder: self.src_leg.transponder().to_string(),
            dst_transponder: self.dst_leg.transponder().to_string(),
            path: self.path.fibers.clone(),
            lambda: wavelength,
            total_latency_ms: self.latency_us as f64 / 1000.0,
            feasible: verdict.is_ok(),
            reason: verdict.as_ref().err().map(|r| r.to_string()),
            reject: verdict.as_ref().err().cloned(),
        }
    }
}

pub(super) struct Hit {
    pub route: Route,
    pub wavelength: u32,
    pub groomed: bool,
}

/// First node of the leg (from the site side) at `layer` that can terminate
/// `mechanism` under the compliance profile, and its key length.
fn leg_endpoint(
    leg: &AccessLeg,
    layer: LayerId,
    mechanism: Mechanism,
    aci: &AppCentricIntent,
    attachments: &AttachmentMap,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
) -> Option<(usize, u32)> {
    leg.nodes.iter().enumerate().find_map(|(i, id)| {
        let node = topology.node(id)?;
        if node.layer != layer {
            return None;
        }
        let listed = attachments.get(&layer).is_some_and(|atts| {
            atts.iter()
                .any(|a| &a.node_id == id && a.capability.is_some_and(|c| c.mechanism == mechanism))
        });
        let cap = node.capability(mechanism)?;
        (listed && profiles.permits(aci.encryption.compliance, mechanism, cap.key_length_bits))
            .then_some((i, cap.key_length_bits))
    })
}

/// First access link between the site device and the encryption point that
/// leaves the site, if any.
fn unprotected_link(
    leg: &AccessLeg,
    endpoint: usize,
    site: &str,
    topology: &MultiLayerTopology,
) -> Option<String> {
    let members = topology.site(site)?;
    (0..endpoint).find_map(|j| {
        let inside = members.contains(&leg.nodes[j]) && members.contains(&leg.nodes[j + 1]);
        (!inside).then(|| leg.links[j].clone())
    })
}

fn fiber_latency_us(topology: &MultiLayerTopology, path: &FiberPath) -> u64 {
    path.fibers
        .iter()
        .filter_map(|f| topology.link(f))
        .map(|l| l.latency_us())
        .sum()
}

/// The [`MAX_PATHS_DEFAULT`] shortest simple paths, by latency then fiber ids.
fn bounded_paths(topology: &MultiLayerTopology, from: &str, to: &str) -> Vec<(FiberPath, u64)> {
    let mut paths: Vec<(FiberPath, u64)> = simple_fiber_paths(topology, from, to)
        .into_iter()
        .map(|p| {
            let us = fiber_latency_us(topology, &p);
            (p, us)
        })
        .collect();
    paths.sort_by(|a, b| (a.1, &a.0.fibers).cmp(&(b.1, &b.0.fibers)));
    paths.truncate(MAX_PATHS_DEFAULT);
    paths
}

fn routes_for_layer(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    layer: LayerId,
    mechanism: Option<Mechanism>,
) -> Vec<Route> {
    let side = |site: &str, attachments: &AttachmentMap| -> Vec<(AccessLeg, Option<(usize, u32)>)> {
        access_legs(topology, site)
            .into_iter()
            .filter_map(|leg| match mechanism {
                None => Some((leg, None)),
                Some(m) => leg_endpoint(&leg, layer, m, aci, attachments, topology, profiles)
                    .map(|ep| (leg, Some(ep))),
            })
            .collect()
    };
    let src_legs = side(&aci.src_site, &aci.attachments.src);
    let dst_legs = side(&aci.dst_site, &aci.attachments.dst);

    let mut routes = Vec::new();
    for (sl, sep) in &src_legs {
        for (dl, dep) in &dst_legs {
            if sl.transponder() == dl.transponder() {
                continue;
            }
            let key_bits = match (sep, dep) {
                (Some((_, a)), Some((_, b))) => Some(*a.min(b)),
                _ => None,
            };
            let unprotected = sep
                .and_then(|(i, _)| unprotected_link(sl, i, &aci.src_site, topology))
                .or_else(|| dep.and_then(|(i, _)| unprotected_link(dl, i, &aci.dst_site, topology)));
            for (path, fiber_us) in bounded_paths(topology, &sl.roadm, &dl.roadm) {
                let latency_us = sl.latency_us(topology) + fiber_us + dl.latency_us(topology);
                let mut links = sl.links.clone();
                links.push(sl.client_attach.clone());
                links.extend(path.fibers.iter().cloned());
                links.push(dl.client_attach.clone());
                links.extend(dl.links.iter().rev().cloned());
                routes.push(Route {
                    layer,
                    mechanism,
                    src_leg: sl.clone(),
                    dst_leg: dl.clone(),
                    src_endpoint: sep.map(|(i, _)| i),
                    dst_endpoint: dep.map(|(i, _)| i),
                    key_bits,
                    path,
                    latency_us,
                    links,
                    unprotected: unprotected.clone(),
                });
            }
        }
    }
    routes.sort_by(|a, b| {
        (a.latency_us, &a.path.fibers, &a.links).cmp(&(b.latency_us, &b.path.fibers, &b.links))
    });
    routes
}

fn wavelength_range(topology: &MultiLayerTopology, route: &Route) -> u32 {
    route
        .path
        .fibers
        .iter()
        .map(|f| topology.wavelength_count(f))
        .min()
        .unwrap_or(topology.defaults().wavelength_count)
}

/// Feasibility of one (route, wavelength) candidate. `Ok(true)` means the
/// service would share an existing lightpath.
fn check(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    ledger: &ResourceLedger,
    route: &Route,
    wavelength: u32,
) -> Result<bool, RejectReason> {
    if let Some(link) = &route.unprotected {
        return Err(RejectReason::UnprotectedAccess { link: link.clone() });
    }
    if let Some(max) = aci.max_latency_ms {
        let max_us = (max * 1000.0).round() as u64;
        if route.latency_us > max_us {
            return Err(RejectReason::LatencyExceeded {
                latency_us: route.latency_us,
                max_us,
            });
        }
    }
    for link in route.overlay_links() {
        let capacity = topology.link(link).map_or(0, |l| l.capacity_mbps);
        let residual = capacity.saturating_sub(ledger.reserved_bandwidth(link));
        if aci.bandwidth_mbps > residual {
            return Err(RejectReason::InsufficientCapacity {
                link: link.clone(),
                residual_mbps: residual,
            });
        }
    }

    let line_rate = topology.defaults().line_rate_mbps;
    let src_t = route.src_leg.transponder();
    let dst_t = route.dst_leg.transponder();
    let key = LightpathKey::new(src_t, dst_t, &route.path.fibers, wavelength);
    if let Some(lp) = ledger.lightpath(&key) {
        if lp.encrypted == route.wants_optical_encryption()
            && lp.load_mbps() + aci.bandwidth_mbps <= line_rate
        {
            return Ok(true);
        }
        return Err(RejectReason::NoFreeWavelength {
            wavelength,
            link: route.path.fibers.first().cloned().unwrap_or_else(|| src_t.to_string()),
            holder: lp.owner().to_string(),
        });
    }
    for fiber in &route.path.fibers {
        if let Some(holder) = ledger.fiber_holder(fiber, wavelength) {
            return Err(RejectReason::NoFreeWavelength {
                wavelength,
                link: fiber.clone(),
                holder: holder.owner().to_string(),
            });
        }
    }
    let src_degree = route.path.fibers.first().map_or("local", String::as_str);
    let dst_degree = route.path.fibers.last().map_or("local", String::as_str);
    for (t, degree) in [(src_t, src_degree), (dst_t, dst_degree)] {
        if ledger.port_in_use(t, wavelength, degree, &key) {
            return Err(RejectReason::PortClash {
                transponder: t.to_string(),
                wavelength,
            });
        }
    }
    if aci.bandwidth_mbps > line_rate {
        return Err(RejectReason::ExceedsLineRate {
            line_rate_mbps: line_rate,
        });
    }
    Ok(false)
}

/// Walks candidates in search order, calling `visit` with each verdict until
/// it breaks.
fn walk(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    ledger: &ResourceLedger,
    layers: &[(LayerId, Option<Mechanism>)],
    mut visit: impl FnMut(&Route, u32, Result<bool, RejectReason>) -> ControlFlow<()>,
) {
    for (layer, mechanism) in layers {
        for route in routes_for_layer(aci, topology, profiles, *layer, *mechanism) {
            for wavelength in 0..wavelength_range(topology, &route) {
                let verdict = check(aci, topology, ledger, &route, wavelength);
                if visit(&route, wavelength, verdict).is_break() {
                    return;
                }
            }
        }
    }
}

/// Returns the first feasible candidate; every rejected one before it is
/// passed to `on_reject`.
pub(super) fn evaluate(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    ledger: &ResourceLedger,
    layers: &[(LayerId, Option<Mechanism>)],
    mut on_reject: impl FnMut(&CandidateReport),
) -> Option<Hit> {
    let mut hit = None;
    walk(aci, topology, profiles, ledger, layers, |route, wavelength, verdict| match verdict {
        Ok(groomed) => {
            hit = Some(Hit {
                route: route.clone(),
                wavelength,
                groomed,
            });
            ControlFlow::Break(())
        }
        Err(_) => {
            on_reject(&route.report(wavelength, &verdict));
            ControlFlow::Continue(())
        }
    });
    hit
}

pub(super) fn evaluate_all(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    ledger: &ResourceLedger,
    layers: &[(LayerId, Option<Mechanism>)],
    mut on_row: impl FnMut(&CandidateReport),
) {
    walk(aci, topology, profiles, ledger, layers, |route, wavelength, verdict| {
        on_row(&route.report(wavelength, &verdict));
        ControlFlow::Continue(())
    });
}
