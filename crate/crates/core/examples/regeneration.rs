//! Recursive repair of a corrupted node, planned directly and inside a run.
//!
//!     cargo run --example regeneration

use std::collections::{BTreeMap, BTreeSet};

use shardsim::config::ScenarioConfig;
use shardsim::event::EventKind;
use shardsim::resilience::{regenerate, TaskSource};
use shardsim::sim::{ClusterEvent, Simulation};
use shardsim::strategies::{KeyHasher, StrategyKind};
use shardsim::{Key, NodeId, SimTime};

fn main() -> shardsim::Result<()> {
    // Node 0 lost 200 keys. Node 1 holds the ones hashing low, node 2 the
    // ones hashing high, and nobody has key 199.
    let hasher = KeyHasher::new(0);
    let damaged: Vec<(Key, u64)> = (0..200).map(|k| (k, hasher.hash_key(k))).collect();
    let mut sources: BTreeMap<NodeId, BTreeSet<Key>> = BTreeMap::new();
    for &(k, h) in &damaged[..199] {
        let holder = if h < 1 << 63 { NodeId(1) } else { NodeId(2) };
        sources.entry(holder).or_default().insert(k);
    }
    let plan = regenerate(NodeId(0), &damaged, &sources, 100.0);
    for t in &plan.tasks {
        let indent = "  ".repeat(t.depth as usize);
        let what = match t.source {
            TaskSource::Replica(n) => format!("copy from {n}"),
            TaskSource::Split => "split".into(),
            TaskSource::Unrecoverable => "unrecoverable".into(),
        };
        println!("{indent}depth {} arc {:#018x}: {} keys, {what}", t.depth, t.arc.start, t.damaged);
    }
    println!(
        "{} steps restore {} keys in {}; lost {:?}",
        plan.steps.len(),
        plan.restored_keys(),
        plan.total_duration(),
        plan.unrecoverable
    );

    let mut cfg = ScenarioConfig::new(6, 120.0, StrategyKind::Adaptive);
    cfg.regions = 3;
    cfg.workload.key_count = 5000;
    let mut sim = Simulation::new(&cfg, 1)?;
    sim.schedule(
        SimTime::from_secs(30),
        EventKind::Corruption {
            node: NodeId(2),
            fraction: 0.4,
            pick_seed: 9,
        },
    )?;
    let trace = sim.finish()?;
    let mut restored = 0;
    let mut last_step = SimTime::ZERO;
    for e in &trace.events {
        match e.event {
            ClusterEvent::Corruption { .. } | ClusterEvent::RegenPlanned { .. } => println!("{} {:?}", e.time, e.event),
            ClusterEvent::RegenStep { restored: r, .. } => {
                restored += r;
                last_step = e.time;
            }
            _ => {}
        }
    }
    println!("{restored} keys restored by {last_step}; keys lost at end of run: {}", trace.lost_keys);
    Ok(())
}
