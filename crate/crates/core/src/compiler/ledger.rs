use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{CandidateSolution, CompileError, ServiceRecord};
use crate::topology::{LinkKind, MultiLayerTopology};

/// One reserved resource.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LedgerEntry {
    #[serde(rename_all = "camelCase")]
    Wavelength { link_id: String, wavelength_index: u32 },
    #[serde(rename_all = "camelCase")]
    Bandwidth { link_id: String, mbps: u64 },
}

/// Orientation-free identity of a lightpath.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LightpathKey {
    pub a_transponder: String,
    pub b_transponder: String,
    /// Fibers oriented from `a_transponder`.
    pub fibers: Vec<String>,
    pub wavelength: u32,
}

impl LightpathKey {
    pub fn new(src: &str, dst: &str, fibers: &[String], wavelength: u32) -> Self {
        if src <= dst {
            Self {
                a_transponder: src.to_string(),
                b_transponder: dst.to_string(),
                fibers: fibers.to_vec(),
                wavelength,
            }
        } else {
            Self {
                a_transponder: dst.to_string(),
                b_transponder: src.to_string(),
                fibers: fibers.iter().rev().cloned().collect(),
                wavelength,
            }
        }
    }

    /// Line-side degree of the lightpath at `transponder`.
    pub fn degree_at(&self, transponder: &str) -> Option<&str> {
        let fiber = if transponder == self.a_transponder {
            self.fibers.first()
        } else if transponder == self.b_transponder {
            self.fibers.last()
        } else {
            return None;
        };
        Some(fiber.map_or("local", String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Lightpath {
    pub key: LightpathKey,
    pub encrypted: bool,
    /// Service id -> bandwidth carried.
    pub users: BTreeMap<String, u64>,
}

impl Lightpath {
    pub fn load_mbps(&self) -> u64 {
        self.users.values().sum()
    }

    /// The service reported as occupying the wavelength: lowest user id.
    pub fn owner(&self) -> &str {
        self.users.keys().next().map_or("", String::as_str)
    }
}

/// Authoritative record of reserved wavelengths and bandwidth. Mirrors
/// wavelength ownership into the topology's per-fiber occupancy maps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceLedger {
    records: BTreeMap<String, ServiceRecord>,
    lightpaths: BTreeMap<LightpathKey, Lightpath>,
    /// (fiber, wavelength) -> lightpath holding it
    #[serde(skip)]
    fiber_index: BTreeMap<(String, u32), LightpathKey>,
    /// link -> service -> Mbps
    bandwidth: BTreeMap<String, BTreeMap<String, u64>>,
    generations: BTreeMap<String, u32>,
}

impl ResourceLedger {
    pub fn record(&self, intent_id: &str) -> Option<&ServiceRecord> {
        self.records.get(intent_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ServiceRecord> {
        self.records.values()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.lightpaths.is_empty() && self.bandwidth.is_empty()
    }

    pub fn lightpaths(&self) -> impl Iterator<Item = &Lightpath> {
        self.lightpaths.values()
    }

    pub fn lightpath(&self, key: &LightpathKey) -> Option<&Lightpath> {
        self.lightpaths.get(key)
    }

    pub fn fiber_holder(&self, fiber: &str, wavelength: u32) -> Option<&Lightpath> {
        self.fiber_index
            .get(&(fiber.to_string(), wavelength))
            .and_then(|k| self.lightpaths.get(k))
    }

    pub fn reserved_bandwidth(&self, link: &str) -> u64 {
        self.bandwidth.get(link).map_or(0, |m| m.values().sum())
    }

    /// Whether another lightpath already uses `wavelength` on the same
    /// line-side degree of `transponder`.
    pub fn port_in_use(&self, transponder: &str, wavelength: u32, degree: &str, except: &LightpathKey) -> bool {
        self.lightpaths.keys().any(|k| {
            k != except && k.wavelength == wavelength && k.degree_at(transponder) == Some(degree)
        })
    }

    pub fn generation(&self, intent_id: &str) -> u32 {
        self.generations.get(intent_id).copied().unwrap_or(0)
    }

    /// Services whose traversed links include `link`, in id order.
    pub fn services_using_link(&self, link: &str) -> Vec<String> {
        self.records
            .values()
            .filter(|r| r.solution.traversed_links().iter().any(|l| l == link))
            .map(|r| r.intent_id.clone())
            .collect()
    }

    /// Checks a solution against the current reservations and builds the
    /// record that [`ResourceLedger::commit`] would apply. Pure.
    pub fn prepare(
        &self,
        topology: &MultiLayerTopology,
        solution: &CandidateSolution,
        intent_id: &str,
    ) -> Result<ServiceRecord, CompileError> {
        if self.records.contains_key(intent_id) {
            return Err(CompileError::Conflict(format!("{intent_id} already holds a reservation")));
        }
        let bw = solution.bandwidth_mbps;
        for link in &solution.overlay_path {
            let capacity = topology.link(link).map_or(0, |l| l.capacity_mbps);
            if self.reserved_bandwidth(link) + bw > capacity {
                return Err(CompileError::Conflict(format!("capacity on {link} exhausted")));
            }
        }
        let key = solution.lightpath_key();
        let line_rate = topology.defaults().line_rate_mbps;
        match self.lightpaths.get(&key) {
            Some(lp) => {
                if lp.encrypted != solution.optical_encryption() || lp.load_mbps() + bw > line_rate {
                    return Err(CompileError::Conflict(format!(
                        "wavelength {} taken on {:?}",
                        key.wavelength, key.fibers
                    )));
                }
            }
            None => {
                if bw > line_rate {
                    return Err(CompileError::Conflict("bandwidth exceeds line rate".into()));
                }
                for fiber in &key.fibers {
                    let count = topology.wavelength_count(fiber);
                    if key.wavelength >= count || self.fiber_holder(fiber, key.wavelength).is_some() {
                        return Err(CompileError::Conflict(format!(
                            "wavelength {} unavailable on {fiber}",
                            key.wavelength
                        )));
                    }
                }
                for t in [&key.a_transponder, &key.b_transponder] {
                    let degree = key.degree_at(t).unwrap_or("local");
                    if self.port_in_use(t, key.wavelength, degree, &key) {
                        return Err(CompileError::Conflict(format!(
                            "wavelength {} in use at {t}",
                            key.wavelength
                        )));
                    }
                }
            }
        }

        let mut entries: Vec<LedgerEntry> = solution
            .optical_path
            .iter()
            .map(|f| LedgerEntry::Wavelength {
                link_id: f.clone(),
                wavelength_index: solution.wavelength_index,
            })
            .collect();
        entries.extend(solution.overlay_path.iter().map(|l| LedgerEntry::Bandwidth {
            link_id: l.clone(),
            mbps: bw,
        }));
        Ok(ServiceRecord {
            intent_id: intent_id.to_string(),
            solution: solution.clone(),
            reserved_resources: entries,
            installed_at_revision: topology.revision(),
            generation: self.generation(intent_id),
        })
    }

    /// Applies a record produced by [`ResourceLedger::prepare`] (or read back
    /// from the event log). Does not re-check feasibility.
    pub fn commit(&mut self, topology: &mut MultiLayerTopology, record: ServiceRecord) {
        let id = record.intent_id.clone();
        let solution = &record.solution;
        let key = solution.lightpath_key();
        let lp = self.lightpaths.entry(key.clone()).or_insert_with(|| Lightpath {
            key: key.clone(),
            encrypted: solution.optical_encryption(),
            users: BTreeMap::new(),
        });
        lp.users.insert(id.clone(), solution.bandwidth_mbps);
        let owner = lp.owner().to_string();
        for fiber in &key.fibers {
            self.fiber_index.insert((fiber.clone(), key.wavelength), key.clone());
            topology.set_occupancy(fiber, key.wavelength, Some(&owner));
        }
        for link in &solution.overlay_path {
            self.bandwidth
                .entry(link.clone())
                .or_default()
                .insert(id.clone(), solution.bandwidth_mbps);
        }
        *self.generations.entry(id.clone()).or_insert(0) = record.generation + 1;
        self.records.insert(id, record);
    }

    /// Checks and applies in one step; all or nothing.
    pub fn reserve(
        &mut self,
        topology: &mut MultiLayerTopology,
        solution: &CandidateSolution,
        intent_id: &str,
    ) -> Result<ServiceRecord, CompileError> {
        let record = self.prepare(topology, solution, intent_id)?;
        self.commit(topology, record.clone());
        Ok(record)
    }

    /// Drops every reservation of the intent. Releasing an unknown or already
    /// released intent is a no-op.
    pub fn release(&mut self, topology: &mut MultiLayerTopology, intent_id: &str) -> Option<ServiceRecord> {
        let Some(record) = self.records.remove(intent_id) else {
            warn!("release of {intent_id}: no live reservation");
            return None;
        };
        let key = record.solution.lightpath_key();
        if let Some(lp) = self.lightpaths.get_mut(&key) {
            lp.users.remove(intent_id);
            if lp.users.is_empty() {
                self.lightpaths.remove(&key);
                for fiber in &key.fibers {
                    self.fiber_index.remove(&(fiber.clone(), key.wavelength));
                    topology.set_occupancy(fiber, key.wavelength, None);
                }
            } else {
                let owner = lp.owner().to_string();
                for fiber in &key.fibers {
                    topology.set_occupancy(fiber, key.wavelength, Some(&owner));
                }
            }
        }
        for link in &record.solution.overlay_path {
            if let Some(m) = self.bandwidth.get_mut(link) {
                m.remove(intent_id);
                if m.is_empty() {
                    self.bandwidth.remove(link);
                }
            }
        }
        Some(record)
    }

    /// Cross-checks ledger, lightpaths and topology occupancy. Returns every
    /// inconsistency found; empty means sound.
    pub fn audit(&self, topology: &MultiLayerTopology) -> Vec<String> {
        let mut out = topology.occupancy_violations();
        let line_rate = topology.defaults().line_rate_mbps;

        let mut expected: BTreeMap<(String, u32), String> = BTreeMap::new();
        for lp in self.lightpaths.values() {
            if lp.users.is_empty() {
                out.push(format!("lightpath {:?} has no users", lp.key));
            }
            if lp.load_mbps() > line_rate {
                out.push(format!("lightpath {:?} over line rate", lp.key));
            }
            for f in &lp.key.fibers {
                if expected.insert((f.clone(), lp.key.wavelength), lp.owner().to_string()).is_some() {
                    out.push(format!("{f} λ{} assigned twice", lp.key.wavelength));
                }
            }
            for user in lp.users.keys() {
                match self.records.get(user) {
                    Some(r) if r.solution.lightpath_key() == lp.key => {}
                    _ => out.push(format!("lightpath user {user} has no matching record")),
                }
            }
        }
        for link in topology.links().filter(|l| l.kind == LinkKind::Fiber) {
            for (idx, owner) in &link.lambda_occupancy {
                match expected.remove(&(link.id.clone(), *idx)) {
                    Some(o) if &o == owner => {}
                    other => out.push(format!(
                        "{} λ{idx}: topology says {owner}, ledger says {other:?}",
                        link.id
                    )),
                }
            }
        }
        for ((f, idx), owner) in expected {
            out.push(format!("{f} λ{idx} held by {owner} but free in topology"));
        }
        for (k, key) in &self.fiber_index {
            if !self.lightpaths.contains_key(key) || !key.fibers.contains(&k.0) {
                out.push(format!("stale fiber index entry {k:?}"));
            }
        }

        for (link, users) in &self.bandwidth {
            let capacity = topology.link(link).map_or(0, |l| l.capacity_mbps);
            let used: u64 = users.values().sum();
            if used > capacity {
                out.push(format!("{link}: {used} Mbps reserved over capacity {capacity}"));
            }
            for user in users.keys() {
                if !self.records.get(user).is_some_and(|r| r.solution.overlay_path.contains(link)) {
                    out.push(format!("{link}: bandwidth held by {user} without record"));
                }
            }
        }
        for r in self.records.values() {
            if !self
                .lightpaths
                .get(&r.solution.lightpath_key())
                .is_some_and(|lp| lp.users.contains_key(&r.intent_id))
            {
                out.push(format!("record {} has no lightpath share", r.intent_id));
            }
        }
        out
    }

    /// Rebuilds derived indexes after deserialization.
    pub fn reindex(&mut self) {
        self.fiber_index = self
            .lightpaths
            .keys()
            .flat_map(|k| k.fibers.iter().map(move |f| ((f.clone(), k.wavelength), k.clone())))
            .collect();
    }
}
