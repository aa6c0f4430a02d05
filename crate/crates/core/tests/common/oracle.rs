//! Brute-force reference compiler. Works on the raw topology JSON and keeps
//! its own reservation table; shares no code with the library beyond the
//! input format. Enumerates every (layer, src leg, dst leg, fiber path,
//! wavelength) tuple, keeps the feasible ones and returns the smallest by
//! (layer rank, latency, fibers, links, wavelength).

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

pub const LAYERS: [&str; 3] = ["L0_OPTICAL", "L2_ETHERNET", "L3_IP"];

fn mech_of(layer: &str) -> &'static str {
    match layer {
        "L0_OPTICAL" => "OTN_AES",
        "L2_ETHERNET" => "MACSEC",
        _ => "IPSEC_GRE",
    }
}

#[derive(Debug, Clone)]
pub struct ONode {
    pub kind: String,
    pub layer: String,
    /// mechanism -> best key length
    pub caps: BTreeMap<String, u32>,
}

#[derive(Debug, Clone)]
pub struct OLink {
    pub id: String,
    pub a: String,
    pub b: String,
    pub kind: String,
    pub capacity: u64,
    pub latency_us: u64,
    pub up: bool,
    pub lambdas: u32,
}

impl OLink {
    fn other(&self, n: &str) -> Option<&str> {
        if self.a == n {
            Some(&self.b)
        } else if self.b == n {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct OTopo {
    pub nodes: BTreeMap<String, ONode>,
    pub links: BTreeMap<String, OLink>,
    pub sites: BTreeMap<String, BTreeSet<String>>,
    pub line_rate: u64,
}

impl OTopo {
    pub fn from_json(doc: &Value) -> Self {
        let default_w = doc["defaults"]["wavelengthCount"].as_u64().unwrap_or(4) as u32;
        let line_rate = doc["defaults"]["lineRateMbps"].as_u64().unwrap_or(10000);
        let mut nodes = BTreeMap::new();
        for n in doc["nodes"].as_array().unwrap() {
            let mut caps = BTreeMap::new();
            for c in n["capabilities"].as_array().into_iter().flatten() {
                let m = c["mechanism"].as_str().unwrap().to_string();
                let k = c["keyLengthBits"].as_u64().unwrap() as u32;
                let e = caps.entry(m).or_insert(0);
                *e = (*e).max(k);
            }
            nodes.insert(
                n["id"].as_str().unwrap().to_string(),
                ONode {
                    kind: n["kind"].as_str().unwrap().to_string(),
                    layer: n["layer"].as_str().unwrap().to_string(),
                    caps,
                },
            );
        }
        let mut links = BTreeMap::new();
        for l in doc["links"].as_array().unwrap() {
            let id = l["id"].as_str().unwrap().to_string();
            links.insert(
                id.clone(),
                OLink {
                    id,
                    a: l["aNode"].as_str().unwrap().to_string(),
                    b: l["bNode"].as_str().unwrap().to_string(),
                    kind: l["kind"].as_str().unwrap().to_string(),
                    capacity: l["capacityMbps"].as_u64().unwrap(),
                    latency_us: (l["latencyMs"].as_f64().unwrap() * 1000.0).round() as u64,
                    up: l["state"].as_str().unwrap_or("UP") == "UP",
                    lambdas: l["wavelengthCount"].as_u64().map_or(default_w, |w| w as u32),
                },
            );
        }
        let sites = doc["sites"]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.as_array().unwrap().iter().map(|m| m.as_str().unwrap().to_string()).collect(),
                )
            })
            .collect();
        OTopo {
            nodes,
            links,
            sites,
            line_rate,
        }
    }

    fn up_links<'a>(&'a self, node: &'a str, kind: &'a str) -> impl Iterator<Item = &'a OLink> + 'a {
        self.links
            .values()
            .filter(move |l| l.up && l.kind == kind && (l.a == node || l.b == node))
    }
}

#[derive(Debug, Clone)]
pub struct OLightpath {
    pub a: String,
    pub b: String,
    pub fibers: Vec<String>,
    pub lambda: u32,
    pub encrypted: bool,
    pub users: BTreeMap<String, u64>,
}

impl OLightpath {
    fn degree_at(&self, t: &str) -> Option<String> {
        let f = if t == self.a {
            self.fibers.first()
        } else if t == self.b {
            self.fibers.last()
        } else {
            return None;
        };
        Some(f.cloned().unwrap_or_else(|| "local".into()))
    }
}

/// What the oracle remembers about reservations.
#[derive(Debug, Clone, Default)]
pub struct OLedger {
    pub lightpaths: Vec<OLightpath>,
    pub bandwidth: BTreeMap<String, u64>,
    pub services: BTreeMap<String, OHeld>,
}

/// (transponder a, transponder b, fibers, lambda, overlay links, bw) held by one intent.
pub type OHeld = (String, String, Vec<String>, u32, Vec<String>, u64);

fn norm(a: &str, b: &str, fibers: &[String]) -> (String, String, Vec<String>) {
    if a <= b {
        (a.into(), b.into(), fibers.to_vec())
    } else {
        (b.into(), a.into(), fibers.iter().rev().cloned().collect())
    }
}

impl OLedger {
    fn find(&self, a: &str, b: &str, fibers: &[String], lambda: u32) -> Option<&OLightpath> {
        let (a, b, f) = norm(a, b, fibers);
        self.lightpaths
            .iter()
            .find(|lp| lp.a == a && lp.b == b && lp.fibers == f && lp.lambda == lambda)
    }

    pub fn reserve(&mut self, id: &str, c: &OChoice, bw: u64) {
        let (a, b, f) = norm(&c.src_t, &c.dst_t, &c.fibers);
        match self
            .lightpaths
            .iter_mut()
            .find(|lp| lp.a == a && lp.b == b && lp.fibers == f && lp.lambda == c.lambda)
        {
            Some(lp) => {
                lp.users.insert(id.into(), bw);
            }
            None => self.lightpaths.push(OLightpath {
                a: a.clone(),
                b: b.clone(),
                fibers: f.clone(),
                lambda: c.lambda,
                encrypted: c.layer == "L0_OPTICAL" && c.mechanism.is_some(),
                users: BTreeMap::from([(id.to_string(), bw)]),
            }),
        }
        for l in &c.overlay {
            *self.bandwidth.entry(l.clone()).or_default() += bw;
        }
        self.services.insert(id.into(), (a, b, f, c.lambda, c.overlay.clone(), bw));
    }

    pub fn release(&mut self, id: &str) {
        let Some((a, b, f, lambda, overlay, bw)) = self.services.remove(id) else { return };
        for lp in &mut self.lightpaths {
            if lp.a == a && lp.b == b && lp.fibers == f && lp.lambda == lambda {
                lp.users.remove(id);
            }
        }
        self.lightpaths.retain(|lp| !lp.users.is_empty());
        for l in overlay {
            *self.bandwidth.get_mut(&l).unwrap() -= bw;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ORequest {
    pub src: String,
    pub dst: String,
    pub bw: u64,
    pub max_latency_ms: Option<f64>,
    pub required: bool,
    pub compliance: String,
    pub preference: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OChoice {
    pub layer: String,
    pub mechanism: Option<String>,
    pub src_leg: Vec<String>,
    pub dst_leg: Vec<String>,
    pub src_t: String,
    pub dst_t: String,
    pub fibers: Vec<String>,
    pub lambda: u32,
    pub groomed: bool,
    pub latency_us: u64,
    pub overlay: Vec<String>,
    pub key_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OVerdict {
    Chosen(OChoice),
    NoLayer,
    NoPath,
    Unresolvable,
}

/// (allowed mechanisms, min key) per compliance level.
pub type Profiles = BTreeMap<String, (BTreeSet<String>, u32)>;

pub fn profiles_from_json(doc: &Value) -> Profiles {
    doc.as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| {
            let mechs = v["allowedMechanisms"]
                .as_array()
                .unwrap()
                .iter()
                .map(|m| m.as_str().unwrap().to_string())
                .collect();
            (k.clone(), (mechs, v["minKeyLengthBits"].as_u64().unwrap() as u32))
        })
        .collect()
}

/// Nodes reachable from the site's members over UP transitional links,
/// not continuing past transponders.
fn reachable(t: &OTopo, site: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<String> = t.sites[site].iter().cloned().collect();
    while let Some(n) = stack.pop() {
        if !seen.insert(n.clone()) {
            continue;
        }
        if t.nodes[&n].kind == "TRANSPONDER" {
            continue;
        }
        for l in t.up_links(&n, "TRANSITIONAL") {
            stack.push(l.other(&n).unwrap().to_string());
        }
    }
    seen
}

/// All simple chains site-node -> ... -> transponder over UP transitional
/// links, as (nodes, links).
fn legs(t: &OTopo, site: &str) -> Vec<(Vec<String>, Vec<String>)> {
    fn go(t: &OTopo, nodes: &mut Vec<String>, links: &mut Vec<String>, out: &mut Vec<(Vec<String>, Vec<String>)>) {
        let here = nodes.last().unwrap().clone();
        if t.nodes[&here].kind == "TRANSPONDER" {
            if t.up_links(&here, "CLIENT_ATTACH").next().is_some() {
                out.push((nodes.clone(), links.clone()));
            }
            return;
        }
        let next: Vec<(String, String)> = t
            .up_links(&here, "TRANSITIONAL")
            .map(|l| (l.id.clone(), l.other(&here).unwrap().to_string()))
            .collect();
        for (lid, n) in next {
            if nodes.contains(&n) {
                continue;
            }
            nodes.push(n);
            links.push(lid);
            go(t, nodes, links, out);
            nodes.pop();
            links.pop();
        }
    }
    let mut out = Vec::new();
    for m in &t.sites[site] {
        go(t, &mut vec![m.clone()], &mut Vec::new(), &mut out);
    }
    out
}

fn fiber_paths(t: &OTopo, from: &str, to: &str) -> Vec<Vec<String>> {
    fn go(t: &OTopo, to: &str, visited: &mut Vec<String>, fibers: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        let here = visited.last().unwrap().clone();
        if here == to {
            out.push(fibers.clone());
            return;
        }
        let next: Vec<(String, String)> = t
            .up_links(&here, "FIBER")
            .map(|l| (l.id.clone(), l.other(&here).unwrap().to_string()))
            .collect();
        for (lid, n) in next {
            if visited.contains(&n) {
                continue;
            }
            visited.push(n);
            fibers.push(lid);
            go(t, to, visited, fibers, out);
            visited.pop();
            fibers.pop();
        }
    }
    let mut out = Vec::new();
    go(t, to, &mut vec![from.to_string()], &mut Vec::new(), &mut out);
    out
}

fn ca_of<'a>(t: &'a OTopo, transponder: &str) -> &'a OLink {
    t.links
        .values()
        .find(|l| l.kind == "CLIENT_ATTACH" && (l.a == transponder || l.b == transponder))
        .unwrap()
}

pub fn solve(t: &OTopo, profiles: &Profiles, ledger: &OLedger, req: &ORequest) -> OVerdict {
    let src_reach = reachable(t, &req.src);
    let dst_reach = reachable(t, &req.dst);
    let resolvable = |reach: &BTreeSet<String>| {
        reach
            .iter()
            .any(|n| t.nodes[n].kind == "TRANSPONDER" && t.up_links(n, "CLIENT_ATTACH").next().is_some())
    };
    if !resolvable(&src_reach) || !resolvable(&dst_reach) {
        return OVerdict::Unresolvable;
    }

    let (allowed, min_key) = profiles[&req.compliance].clone();
    let qualifies = |n: &str, layer: &str| {
        let node = &t.nodes[n];
        let m = mech_of(layer);
        node.layer == layer && allowed.contains(m) && node.caps.get(m).is_some_and(|k| *k >= min_key)
    };

    let layers: Vec<(String, Option<String>)> = if !req.required {
        vec![("L0_OPTICAL".into(), None)]
    } else {
        let ok: Vec<&str> = LAYERS
            .iter()
            .copied()
            .filter(|l| src_reach.iter().any(|n| qualifies(n, l)) && dst_reach.iter().any(|n| qualifies(n, l)))
            .collect();
        let mut order: Vec<&str> = Vec::new();
        for p in req.preference.iter().flatten() {
            if ok.contains(&p.as_str()) && !order.contains(&p.as_str()) {
                order.push(p);
            }
        }
        for l in &ok {
            if !order.contains(l) {
                order.push(l);
            }
        }
        if order.is_empty() {
            return OVerdict::NoLayer;
        }
        order.into_iter().map(|l| (l.to_string(), Some(mech_of(l).to_string()))).collect()
    };

    let src_legs = legs(t, &req.src);
    let dst_legs = legs(t, &req.dst);
    let in_site = |site: &str, a: &str, b: &str| t.sites[site].contains(a) && t.sites[site].contains(b);

    type Key = (usize, u64, Vec<String>, Vec<String>, u32);
    let mut best: Option<(Key, OChoice)> = None;
    for (rank, (layer, mech)) in layers.iter().enumerate() {
        for (sn, sl) in &src_legs {
            for (dn, dl) in &dst_legs {
                let st = sn.last().unwrap();
                let dt = dn.last().unwrap();
                if st == dt {
                    continue;
                }
                let mut key_bits = None;
                let mut unprotected = false;
                if mech.is_some() {
                    let se = sn.iter().position(|n| qualifies(n, layer));
                    let de = dn.iter().position(|n| qualifies(n, layer));
                    let (Some(se), Some(de)) = (se, de) else { continue };
                    key_bits = Some(
                        t.nodes[&sn[se]].caps[mech_of(layer)].min(t.nodes[&dn[de]].caps[mech_of(layer)]),
                    );
                    unprotected = (0..se).any(|j| !in_site(&req.src, &sn[j], &sn[j + 1]))
                        || (0..de).any(|j| !in_site(&req.dst, &dn[j], &dn[j + 1]));
                }
                if unprotected {
                    continue;
                }
                let s_ca = ca_of(t, st);
                let d_ca = ca_of(t, dt);
                let s_roadm = s_ca.other(st).unwrap();
                let d_roadm = d_ca.other(dt).unwrap();
                let overlay: Vec<String> = sl.iter().chain(dl.iter().rev()).cloned().collect();
                if overlay
                    .iter()
                    .any(|l| ledger.bandwidth.get(l).copied().unwrap_or(0) + req.bw > t.links[l].capacity)
                {
                    continue;
                }
                for fibers in fiber_paths(t, s_roadm, d_roadm) {
                    let latency: u64 = sl.iter().map(|l| t.links[l].latency_us).sum::<u64>()
                        + s_ca.latency_us
                        + fibers.iter().map(|f| t.links[f].latency_us).sum::<u64>()
                        + d_ca.latency_us
                        + dl.iter().map(|l| t.links[l].latency_us).sum::<u64>();
                    if let Some(max) = req.max_latency_ms {
                        if latency > (max * 1000.0).round() as u64 {
                            continue;
                        }
                    }
                    let mut all_links = sl.clone();
                    all_links.push(s_ca.id.clone());
                    all_links.extend(fibers.iter().cloned());
                    all_links.push(d_ca.id.clone());
                    all_links.extend(dl.iter().rev().cloned());
                    let w_max = fibers
                        .iter()
                        .map(|f| t.links[f].lambdas)
                        .min()
                        .unwrap_or(4);
                    let wants_enc = layer == "L0_OPTICAL" && mech.is_some();
                    for lambda in 0..w_max {
                        let groomed = match ledger.find(st, dt, &fibers, lambda) {
                            Some(lp) => {
                                if lp.encrypted != wants_enc || lp.users.values().sum::<u64>() + req.bw > t.line_rate {
                                    continue;
                                }
                                true
                            }
                            None => {
                                let fiber_busy = fibers.iter().any(|f| {
                                    ledger
                                        .lightpaths
                                        .iter()
                                        .any(|lp| lp.lambda == lambda && lp.fibers.contains(f))
                                });
                                let (_, _, nf) = norm(st, dt, &fibers);
                                let (na, nb, _) = norm(st, dt, &fibers);
                                let me = OLightpath {
                                    a: na,
                                    b: nb,
                                    fibers: nf,
                                    lambda,
                                    encrypted: false,
                                    users: BTreeMap::new(),
                                };
                                let port_busy = [st, dt].iter().any(|tr| {
                                    let deg = me.degree_at(tr);
                                    ledger
                                        .lightpaths
                                        .iter()
                                        .any(|lp| lp.lambda == lambda && lp.degree_at(tr).is_some() && lp.degree_at(tr) == deg)
                                });
                                if fiber_busy || port_busy || req.bw > t.line_rate {
                                    continue;
                                }
                                false
                            }
                        };
                        let key: Key = (rank, latency, fibers.clone(), all_links.clone(), lambda);
                        if best.as_ref().is_none_or(|(k, _)| key < *k) {
                            best = Some((
                                key,
                                OChoice {
                                    layer: layer.clone(),
                                    mechanism: mech.clone(),
                                    src_leg: sn.clone(),
                                    dst_leg: dn.clone(),
                                    src_t: st.clone(),
                                    dst_t: dt.clone(),
                                    fibers: fibers.clone(),
                                    lambda,
                                    groomed,
                                    latency_us: latency,
                                    overlay: overlay.clone(),
                                    key_bits,
                                },
                            ));
                        }
                    }
                }
            }
        }
    }
    match best {
        Some((_, c)) => OVerdict::Chosen(c),
        None => OVerdict::NoPath,
    }
}
