#![allow(dead_code)]

pub mod oracle;

use inflight_core::compiler::CandidateSolution;
use inflight_core::fixtures::{reference_topology, REFERENCE_TOPOLOGY};
use inflight_core::orchestrator::Orchestrator;
use inflight_core::southbound::Southbound;
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Value};

use oracle::{OChoice, ORequest};

pub const SITES: [&str; 6] = ["A1", "A2", "A3", "B1", "B2", "B3"];
pub const FIBERS: [&str; 3] = ["FIBER-R1-R2", "FIBER-R1-R3", "FIBER-R2-R3"];

pub fn reference_doc() -> Value {
    serde_json::from_str(REFERENCE_TOPOLOGY).unwrap()
}

pub fn orchestrator() -> Orchestrator {
    let topo = reference_topology();
    let sb = Southbound::direct(&topo);
    Orchestrator::new(topo, inflight_core::fixtures::default_profiles(), sb)
}

pub fn generic(src: &str, dst: &str, bw: u64) -> Value {
    json!({"action": "CONNECT", "src": src, "dst": dst, "bandwidthMbps": bw,
           "encryption": {"required": true, "compliance": "GENERIC"}})
}

/// A perturbed copy of the reference ring: random fiber latencies and
/// wavelength counts, random overlay capacities, optional extra overlay
/// links and capabilities, and some links down.
pub fn random_topology(rng: &mut StdRng) -> Value {
    let mut doc = reference_doc();
    let extra = [
        ("TR-S1-T2", "S1", "T2"),
        ("TR-H2-T3a", "H2", "T3a"),
        ("TR-H1-S1", "H1", "S1"),
        ("TR-S2-T3b", "S2", "T3b"),
    ];
    for (id, a, b) in extra {
        if rng.random_bool(0.3) {
            doc["links"].as_array_mut().unwrap().push(json!({
                "id": id, "aNode": a, "bNode": b, "kind": "TRANSITIONAL",
                "capacityMbps": 10000, "latencyMs": 0.1
            }));
        }
    }
    for node in doc["nodes"].as_array_mut().unwrap() {
        let id = node["id"].as_str().unwrap().to_string();
        match id.as_str() {
            "H1" | "H2" if rng.random_bool(0.3) => {
                node["capabilities"] = json!([{"layer": "L3_IP", "mechanism": "IPSEC_GRE", "keyLengthBits": 256}]);
            }
            "S2" if rng.random_bool(0.2) => {
                node["capabilities"] = json!([{"layer": "L2_ETHERNET", "mechanism": "MACSEC", "keyLengthBits": 128}]);
            }
            "T1" | "T3a" if rng.random_bool(0.2) => {
                node["capabilities"] = json!([{"layer": "L0_OPTICAL", "mechanism": "OTN_AES", "keyLengthBits": 128}]);
            }
            _ => {}
        }
    }
    for link in doc["links"].as_array_mut().unwrap() {
        match link["kind"].as_str().unwrap() {
            "FIBER" => {
                link["latencyMs"] = json!(*[0.5, 1.0, 1.0, 1.5, 2.0].choose(rng).unwrap());
                link["wavelengthCount"] = json!(rng.random_range(1..=4));
            }
            "TRANSITIONAL" => {
                link["capacityMbps"] = json!(*[2000, 5000, 10000, 10000].choose(rng).unwrap());
            }
            _ => {}
        }
        if rng.random_bool(0.08) {
            link["state"] = json!("DOWN");
        }
    }
    doc
}

pub fn random_request(rng: &mut StdRng) -> Value {
    let mut sites = SITES.to_vec();
    sites.shuffle(rng);
    if rng.random_bool(0.7) {
        let i = rng.random_range(1..=3);
        sites = vec![SITES[i - 1], SITES[i + 2]];
        sites.shuffle(rng);
    }
    let bw = *[100u64, 1000, 1000, 3000, 6000, 10000, 12000].choose(rng).unwrap();
    let mut req = json!({"action": "CONNECT", "src": sites[0], "dst": sites[1], "bandwidthMbps": bw});
    if rng.random_bool(0.25) {
        req["maxLatencyMs"] = json!(*[1.5, 2.0, 2.5, 3.0, 4.0].choose(rng).unwrap());
    }
    if rng.random_bool(0.8) {
        let compliance = *["GENERIC", "GENERIC", "BSI", "HIPAA"].choose(rng).unwrap();
        let mut enc = json!({"required": true, "compliance": compliance});
        if rng.random_bool(0.3) {
            let mut layers = oracle::LAYERS.to_vec();
            layers.shuffle(rng);
            layers.truncate(rng.random_range(1..=3));
            enc["layerPreference"] = json!(layers);
        }
        req["encryption"] = enc;
    } else {
        req["encryption"] = json!({"required": false});
    }
    req
}

pub fn oracle_request(req: &Value) -> ORequest {
    let enc = &req["encryption"];
    let required = enc["required"].as_bool().unwrap_or(false);
    ORequest {
        src: req["src"].as_str().unwrap().into(),
        dst: req["dst"].as_str().unwrap().into(),
        bw: req["bandwidthMbps"].as_u64().unwrap(),
        max_latency_ms: req["maxLatencyMs"].as_f64(),
        required,
        compliance: enc["compliance"]
            .as_str()
            .unwrap_or(if required { "GENERIC" } else { "NONE" })
            .into(),
        preference: enc["layerPreference"]
            .as_array()
            .map(|a| a.iter().map(|l| l.as_str().unwrap().to_string()).collect()),
    }
}

/// The library's solution in the oracle's vocabulary.
pub fn as_choice(sol: &CandidateSolution) -> OChoice {
    OChoice {
        layer: wire(&sol.layer),
        mechanism: sol.mechanism.map(|m| wire(&m)),
        src_leg: sol.src_leg.nodes.clone(),
        dst_leg: sol.dst_leg.nodes.clone(),
        src_t: sol.src_transponder().into(),
        dst_t: sol.dst_transponder().into(),
        fibers: sol.optical_path.clone(),
        lambda: sol.wavelength_index,
        groomed: sol.groomed,
        latency_us: (sol.total_latency_ms * 1000.0).round() as u64,
        overlay: sol.overlay_path.clone(),
        key_bits: sol.key_length_bits,
    }
}

/// Wire spelling of an enum value.
pub fn wire<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).unwrap().as_str().unwrap().to_string()
}

/// Runs `count` compile fixtures against the oracle. Each random topology
/// hosts a short sequence of compile/reserve/release steps so reservations
/// (grooming, wavelength and port conflicts) are exercised too. Returns the
/// first mismatch.
pub fn run_oracle_fixtures(seed: u64, count: usize) -> Result<OracleStats, String> {
    use inflight_core::compiler::{compile, CompileError, ResourceLedger};
    use inflight_core::fixtures::{default_profiles, DEFAULT_COMPLIANCE};
    use inflight_core::intent::{to_aci, validate_intent, IntentIds};
    use inflight_core::topology::load_topology;
    use oracle::{OLedger, OTopo, OVerdict};
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(seed);
    let profiles = default_profiles();
    let oprofiles = oracle::profiles_from_json(&serde_json::from_str(DEFAULT_COMPLIANCE).unwrap());
    let mut stats = OracleStats::default();
    while stats.fixtures < count {
        let doc = random_topology(&mut rng);
        let mut topo = load_topology(&doc.to_string()).map_err(|e| format!("fixture topology: {e}"))?;
        let otopo = OTopo::from_json(&doc);
        let mut ledger = ResourceLedger::default();
        let mut oledger = OLedger::default();
        let mut ids = IntentIds::default();
        let mut held: Vec<String> = Vec::new();
        for _ in 0..8 {
            if !held.is_empty() && rng.random_bool(0.2) {
                let id = held.swap_remove(rng.random_range(0..held.len()));
                ledger.release(&mut topo, &id);
                oledger.release(&id);
                continue;
            }
            let req = random_request(&mut rng);
            let intent = validate_intent(&req, &topo, &mut ids).map_err(|e| format!("{req}: {e}"))?;
            let got = match to_aci(&intent, &topo) {
                Err(_) => Err(None),
                Ok(mut acis) => compile(&acis.remove(0), &topo, &profiles, &ledger).map_err(Some),
            };
            let want = oracle::solve(&otopo, &oprofiles, &oledger, &oracle_request(&req));
            stats.fixtures += 1;
            match (&got, &want) {
                (Ok(sol), OVerdict::Chosen(c)) => {
                    let mine = as_choice(sol);
                    if &mine != c {
                        return Err(format!("{req}\n  compiler: {mine:?}\n  oracle:   {c:?}"));
                    }
                    stats.chosen += 1;
                    stats.groomed += usize::from(sol.groomed);
                    ledger
                        .reserve(&mut topo, sol, &intent.id)
                        .map_err(|e| format!("reserve after compile: {e}"))?;
                    oledger.reserve(&intent.id, c, intent.bandwidth_mbps);
                    held.push(intent.id.clone());
                    let problems = ledger.audit(&topo);
                    if !problems.is_empty() {
                        return Err(format!("ledger audit: {problems:?}"));
                    }
                }
                (Err(Some(CompileError::NoFeasibleEncryptionLayer)), OVerdict::NoLayer)
                | (Err(Some(CompileError::NoFeasiblePath { .. })), OVerdict::NoPath)
                | (Err(None), OVerdict::Unresolvable) => stats.infeasible += 1,
                _ => return Err(format!("{req}\n  compiler: {got:?}\n  oracle:   {want:?}")),
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleStats {
    pub fixtures: usize,
    pub chosen: usize,
    pub groomed: usize,
    pub infeasible: usize,
}

#[derive(Debug, Clone)]
pub enum Command {
    Submit(Value),
    Withdraw(String),
    Retry(String),
    Event(inflight_core::topology::TopologyEvent),
    /// Submit while one device rejects every PREPARE.
    FaultySubmit(Value, String),
}

/// Picks a command that is meaningful for the current state.
pub fn random_command(rng: &mut StdRng, orch: &Orchestrator, faults: bool) -> Command {
    use inflight_core::intent::IntentState;
    use inflight_core::topology::TopologyEvent;

    let live: Vec<String> = orch
        .intents()
        .filter(|i| matches!(i.state, IntentState::Installed | IntentState::Failed))
        .map(|i| i.id.clone())
        .collect();
    let failed: Vec<String> = orch
        .intents()
        .filter(|i| i.state == IntentState::Failed)
        .map(|i| i.id.clone())
        .collect();
    let roll = rng.random_range(0..100);
    if roll < 45 || live.is_empty() {
        let req = random_request(rng);
        if faults && rng.random_bool(0.15) {
            let devices = ["ET1", "ET2", "T1", "T2", "T3a", "T3b", "S1", "S2", "H1", "H2"];
            return Command::FaultySubmit(req, devices.choose(rng).unwrap().to_string());
        }
        return Command::Submit(req);
    }
    if roll < 65 {
        return Command::Withdraw(live.choose(rng).unwrap().clone());
    }
    if roll < 72 && !failed.is_empty() {
        return Command::Retry(failed.choose(rng).unwrap().clone());
    }
    let down: Vec<String> = orch
        .topology()
        .links()
        .filter(|l| !l.is_up())
        .map(|l| l.id.clone())
        .collect();
    if !down.is_empty() && rng.random_bool(0.6) {
        return Command::Event(TopologyEvent::link_up(down.choose(rng).unwrap().clone()));
    }
    let links: Vec<String> = orch.topology().links().filter(|l| l.is_up()).map(|l| l.id.clone()).collect();
    let link = if rng.random_bool(0.6) {
        FIBERS.choose(rng).unwrap().to_string()
    } else {
        links.choose(rng).unwrap().clone()
    };
    if orch.topology().link(&link).unwrap().is_up() {
        Command::Event(TopologyEvent::link_down(link))
    } else {
        Command::Event(TopologyEvent::link_up(link))
    }
}

pub fn apply_command(orch: &mut Orchestrator, cmd: &Command) -> Result<(), String> {
    use inflight_core::southbound::DeviceFaults;
    let r = match cmd {
        Command::Submit(req) => orch.submit(req).map(|_| ()),
        Command::Withdraw(id) => orch.withdraw(id),
        Command::Retry(id) => orch.retry(id).map(|_| ()),
        Command::Event(e) => orch.handle_event(e.clone()).map(|_| ()),
        Command::FaultySubmit(req, device) => {
            let reject = DeviceFaults {
                reject_prepare: true,
                ..Default::default()
            };
            orch.set_faults(device, reject).map_err(|e| e.to_string())?;
            let r = orch.submit(req).map(|_| ());
            orch.set_faults(device, DeviceFaults::default()).map_err(|e| e.to_string())?;
            r
        }
    };
    r.map_err(|e| format!("{cmd:?}: {e}"))
}
