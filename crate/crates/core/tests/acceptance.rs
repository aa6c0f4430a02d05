//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p inflight-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use inflight_core::fixtures::{default_profiles, reference_topology, DEFAULT_COMPLIANCE};
use inflight_core::intent::{Intent, IntentState};
use inflight_core::orchestrator::Orchestrator;
use inflight_core::southbound::{DeviceFaults, DeviceState, Southbound};
use inflight_core::topology::{LayerId, TopologyEvent};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use common::oracle::{self, OLedger, OTopo, OVerdict};
use common::{apply_command, as_choice, generic, oracle_request, random_command};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const DEMO: [(&str, &str, LayerId); 3] = [
    ("A1", "B1", LayerId::L0Optical),
    ("A2", "B2", LayerId::L2Ethernet),
    ("A3", "B3", LayerId::L3Ip),
];

fn demo_scenario() -> Outcome {
    let start = Instant::now();
    let topo = reference_topology();
    let sb = Southbound::actors(&topo, Duration::from_secs(2));
    let mut orch = Orchestrator::new(topo, default_profiles(), sb);
    for (src, dst, layer) in DEMO {
        let id = orch.submit(&generic(src, dst, 1000)).map_err(|e| e.to_string())?;
        let state = orch.intent(&id).unwrap().state;
        ensure(state == IntentState::Installed, || format!("{src}<->{dst} ended {state}"))?;
        let got = orch.service(&id).unwrap().solution.layer;
        ensure(got == layer, || format!("{src}<->{dst} at {got}, expected {layer}"))?;
        let trace = orch.trace(src, dst).map_err(|e| e.to_string())?;
        ensure(trace.reached_destination, || format!("{src}->{dst} trace did not arrive"))?;
        ensure(trace.uncovered_links.is_empty(), || {
            format!("{src}->{dst} uncovered {:?}", trace.uncovered_links)
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("3 services INSTALLED at L0/L2/L3, all hops encrypted, {elapsed:.2?}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let stats = common::run_oracle_fixtures(0xAC1, 240)?;
    let elapsed = start.elapsed();
    ensure(stats.fixtures >= 200, || format!("only {} fixtures", stats.fixtures))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} fixtures identical ({} solved, {} groomed, {} infeasible), {elapsed:.2?}",
        stats.fixtures, stats.chosen, stats.groomed, stats.infeasible
    ))
}

fn conservation() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xC0);
    let mut orch = common::orchestrator();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut peak = 0;
    for step in 0..1000 {
        let cmd = random_command(&mut rng, &orch, true);
        *counts
            .entry(match cmd {
                common::Command::Submit(_) | common::Command::FaultySubmit(..) => "submit",
                common::Command::Withdraw(_) => "withdraw",
                common::Command::Retry(_) => "retry",
                common::Command::Event(_) => "event",
            })
            .or_default() += 1;
        apply_command(&mut orch, &cmd)?;
        peak = peak.max(orch.ledger().records().count());
        if step % 50 == 49 {
            let problems = orch.audit();
            ensure(problems.is_empty(), || format!("after step {step}: {problems:?}"))?;
        }
    }
    let problems = orch.audit();
    ensure(problems.is_empty(), || format!("{problems:?}"))?;
    let installs = orch
        .intents()
        .flat_map(|i| &i.state_history)
        .filter(|c| c.state == IntentState::Installed)
        .count();
    ensure(installs >= 100 && peak >= 3, || format!("too little load: {installs} installs, peak {peak}"))?;
    Ok(format!(
        "1000 commands {counts:?}, {installs} installs (peak {peak} concurrent); ledger, devices and occupancy consistent"
    ))
}

fn install_atomicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xA70);
    let mut rejected = 0;
    for trial in 0..100 {
        let mut orch = common::orchestrator();
        for _ in 0..rng.random_range(0..3) {
            let (src, dst, _) = *DEMO.choose(&mut rng).unwrap();
            orch.submit(&generic(src, dst, 1000)).map_err(|e| e.to_string())?;
        }
        let (src, dst, _) = *DEMO.choose(&mut rng).unwrap();
        let request = generic(src, dst, 1000);
        let report = orch.explain(&request).map_err(|e| e.to_string())?;
        let first = report.candidates.iter().find(|c| c.feasible).ok_or("no feasible candidate")?;
        // the devices the winning candidate configures
        let mut devices = vec![first.src_transponder.clone(), first.dst_transponder.clone()];
        devices.extend(
            orch.topology()
                .site(src)
                .into_iter()
                .chain(orch.topology().site(dst))
                .flatten()
                .cloned(),
        );
        let victim = devices.choose(&mut rng).unwrap().clone();
        orch.set_faults(
            &victim,
            DeviceFaults {
                reject_prepare: true,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let id = orch.submit(&request).map_err(|e| e.to_string())?;
        let intent = orch.intent(&id).unwrap();
        ensure(intent.state == IntentState::Failed, || {
            format!("trial {trial}: {victim} rejecting, intent {}", intent.state)
        })?;
        rejected += 1;
        let devices: BTreeMap<String, DeviceState> = orch.southbound().snapshot();
        for (dev, state) in &devices {
            ensure(state.pending_configs.is_empty(), || format!("trial {trial}: {dev} has pending config"))?;
            ensure(state.configs_of(&id).next().is_none(), || {
                format!("trial {trial}: {dev} kept config of {id}")
            })?;
        }
        orch.set_faults(&victim, DeviceFaults::default()).map_err(|e| e.to_string())?;
        let problems = orch.audit();
        ensure(problems.is_empty(), || format!("trial {trial}: {problems:?}"))?;
    }
    Ok(format!("{rejected} rejected installs, no partial configuration left"))
}

fn history_tail(intent: &Intent, n: usize) -> Vec<IntentState> {
    let h: Vec<IntentState> = intent.state_history.iter().map(|c| c.state).collect();
    h[h.len().saturating_sub(n)..].to_vec()
}

fn ring_failover() -> Outcome {
    use IntentState::*;
    let profiles = common::oracle::profiles_from_json(&serde_json::from_str(DEFAULT_COMPLIANCE).unwrap());
    let mut checked = 0;
    for (src, dst, _) in DEMO {
        let mut orch = common::orchestrator();
        let id = orch.submit(&generic(src, dst, 1000)).map_err(|e| e.to_string())?;
        let first = orch.service(&id).ok_or("not installed")?.solution.optical_path.clone();
        ensure(first.len() == 1, || format!("{src}: expected the direct arc, got {first:?}"))?;

        let affected = orch
            .handle_event(TopologyEvent::link_down(&first[0]))
            .map_err(|e| e.to_string())?;
        ensure(affected == vec![id.clone()], || format!("affected {affected:?}"))?;
        let intent = orch.intent(&id).unwrap();
        ensure(
            history_tail(intent, 4) == vec![Installed, Recompiling, Installing, Installed],
            || format!("{src}: history {:?}", history_tail(intent, 4)),
        )?;
        let sol = orch.service(&id).unwrap().solution.clone();
        ensure(sol.optical_path.len() == 2 && !sol.optical_path.contains(&first[0]), || {
            format!("{src}: rerouted onto {:?}", sol.optical_path)
        })?;

        let doc = serde_json::to_value(orch.topology().to_document()).unwrap();
        let want = oracle::solve(
            &OTopo::from_json(&doc),
            &profiles,
            &OLedger::default(),
            &oracle_request(&generic(src, dst, 1000)),
        );
        ensure(want == OVerdict::Chosen(as_choice(&sol)), || {
            format!("{src}: oracle {want:?} vs {:?}", as_choice(&sol))
        })?;
        let trace = orch.trace(src, dst).map_err(|e| e.to_string())?;
        ensure(trace.reached_destination && trace.uncovered_links.is_empty(), || {
            format!("{src}: trace after failover {trace:?}")
        })?;

        orch.handle_event(TopologyEvent::link_down(sol.optical_path[0].clone()))
            .map_err(|e| e.to_string())?;
        let intent = orch.intent(&id).unwrap();
        ensure(
            history_tail(intent, 3) == vec![Installed, Recompiling, Failed],
            || format!("{src}: history {:?}", history_tail(intent, 3)),
        )?;
        ensure(orch.service(&id).is_none(), || format!("{src}: FAILED intent holds resources"))?;
        let problems = orch.audit();
        ensure(problems.is_empty(), || format!("{src}: {problems:?}"))?;
        checked += 1;
    }
    Ok(format!("{checked} services moved to the alternate arc (oracle-checked), FAILED once both arcs were cut"))
}

fn recovery_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("events.log");
    let mut rng = StdRng::seed_from_u64(0x6EC);
    let topo = reference_topology();
    let sb = Southbound::direct(&topo);
    let mut orch = Orchestrator::recover(topo, default_profiles(), sb, &log).map_err(|e| e.to_string())?;

    let total = 200;
    let mut cut_points: Vec<usize> = (0..20).map(|_| rng.random_range(1..=total)).collect();
    cut_points.sort();
    let mut checked = 0;
    for step in 1..=total {
        let cmd = random_command(&mut rng, &orch, false);
        apply_command(&mut orch, &cmd)?;
        for _ in cut_points.iter().filter(|c| **c == step) {
            let copy = dir.path().join(format!("restart-{checked}.log"));
            std::fs::copy(&log, &copy).map_err(|e| e.to_string())?;
            let topo = reference_topology();
            let sb = Southbound::direct(&topo);
            let mut again =
                Orchestrator::recover(topo, default_profiles(), sb, &copy).map_err(|e| e.to_string())?;
            let a: Vec<&Intent> = orch.intents().collect();
            let b: Vec<&Intent> = again.intents().collect();
            ensure(a == b, || format!("step {step}: intents differ after restart"))?;
            ensure(orch.ledger() == again.ledger(), || format!("step {step}: ledger differs"))?;
            ensure(orch.topology().to_document() == again.topology().to_document(), || {
                format!("step {step}: topology differs")
            })?;
            let before = orch.southbound().snapshot();
            let after = again.southbound().snapshot();
            ensure(before == after, || format!("step {step}: device state differs after resync"))?;
            checked += 1;
        }
    }
    ensure(checked == 20, || format!("only {checked} restarts"))?;
    Ok(format!("{checked} restarts from log prefixes reproduced intents, ledger, topology and devices"))
}

fn compliance() -> Outcome {
    let mut orch = common::orchestrator();
    let mut bsi = generic("A3", "B3", 1000);
    bsi["encryption"]["compliance"] = serde_json::json!("BSI");
    let id = orch.submit(&bsi).map_err(|e| e.to_string())?;
    let intent = orch.intent(&id).unwrap();
    ensure(intent.state == IntentState::Failed, || format!("BSI intent {}", intent.state))?;
    let reason = intent.failure_reason().unwrap_or_default().to_string();
    ensure(reason.starts_with("NoFeasibleEncryptionLayer"), || format!("reason {reason:?}"))?;

    let id = orch.submit(&generic("A3", "B3", 1000)).map_err(|e| e.to_string())?;
    let state = orch.intent(&id).unwrap().state;
    ensure(state == IntentState::Installed, || format!("GENERIC intent {state}"))?;
    let layer = orch.service(&id).unwrap().solution.layer;
    ensure(layer == LayerId::L3Ip, || format!("GENERIC at {layer}"))?;
    Ok(format!("BSI A3<->B3 FAILED ({reason}); GENERIC INSTALLED at L3_IP"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("demo scenario", demo_scenario),
        ("oracle equivalence", oracle_equivalence),
        ("conservation", conservation),
        ("install atomicity", install_atomicity),
        ("ring failover", ring_failover),
        ("recovery determinism", recovery_determinism),
        ("compliance", compliance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
