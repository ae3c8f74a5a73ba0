//! The event loop: one run of one strategy over one seed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adaptive::{classify_heat, Controller, HeatTier};
use crate::cluster::{inject_failures, ClusterState, MigrationPlan, Node, Outcome, Ownership, Routing, Shard};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::event::{EventKind, EventQueue};
use crate::ids::{Key, NodeId, RegionId, ShardId};
use crate::metrics::{coefficient_of_variation, percentile, HeatCensus, MetricBucket};
use crate::resilience::{failover, regenerate, sync_tick, RegenStep};
use crate::rng::rng_stream;
use crate::strategies::{HashRing, KeyHasher, RangeTable, StrategyKind};
use crate::time::SimTime;
use crate::workload::{generate_requests, Op, Request};

/// Label of the random stream driving arrivals, keys and operations.
pub const WORKLOAD_STREAM: &str = "workload";
/// Label of the random stream driving crashes and corruption.
pub const FAILURE_STREAM: &str = "failures";

/// The request stream of a run; identical for every strategy under one seed.
pub fn workload_schedule(cfg: &ScenarioConfig, seed: u64) -> Vec<Request> {
    let mut rng = rng_stream(seed, WORKLOAD_STREAM);
    generate_requests(&cfg.workload, cfg.duration_time(), &mut rng)
}

/// The failure schedule of a run; identical for every strategy under one seed.
pub fn failure_schedule(cfg: &ScenarioConfig, seed: u64) -> Vec<(SimTime, EventKind)> {
    let mut rng = rng_stream(seed, FAILURE_STREAM);
    inject_failures(&cfg.failure, cfg.duration_time(), cfg.nodes, &mut rng)
}

/// Builds the starting cluster for `cfg.strategy`. Regions are assigned
/// round-robin; baseline shards are dealt round-robin to nodes; ring-based
/// strategies get one shard per ring position, owned by the position's node.
pub fn initial_state(cfg: &ScenarioConfig) -> ClusterState {
    let mut cfg = cfg.clone();
    cfg.resolve();
    let n = cfg.nodes;
    let storage = cfg.cluster.storage_limit.expect("resolved");
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            Node::new(
                NodeId(i as u32),
                RegionId((i % cfg.regions) as u32),
                cfg.cluster.capacity,
                storage,
                cfg.cluster.queue_limit,
            )
        })
        .collect();
    let hasher = KeyHasher::new(cfg.partitioning.hash_seed);
    let keys = cfg.workload.key_count;
    let n_shards = cfg.partitioning.n_shards.expect("resolved");
    let deal = |i: usize| NodeId((i % n) as u32);
    let (shards, routing) = match cfg.strategy {
        StrategyKind::Range => {
            let table = RangeTable::equal_width(keys, n_shards);
            let shards = table
                .bounds()
                .iter()
                .enumerate()
                .map(|(i, &(hi, id))| Shard::new(id, Ownership::Range { lo: table.lower(i), hi }, deal(i)))
                .collect();
            (shards, Routing::Range(table))
        }
        StrategyKind::Hash => {
            let shards = (0..n_shards)
                .map(|i| {
                    Shard::new(
                        ShardId(i),
                        Ownership::HashClass {
                            modulus: n_shards,
                            class: i,
                        },
                        deal(i as usize),
                    )
                })
                .collect();
            (shards, Routing::Hash { n_shards })
        }
        StrategyKind::Consistent | StrategyKind::Adaptive => {
            let ring = HashRing::with_nodes((0..n).map(|i| NodeId(i as u32)), cfg.partitioning.vnodes, hasher);
            let positions: Vec<(u64, NodeId)> = ring.positions().collect();
            let mut arcs = BTreeMap::new();
            let mut shards = Vec::with_capacity(positions.len());
            for (i, &(end, owner)) in positions.iter().enumerate() {
                let start = positions[(i + positions.len() - 1) % positions.len()].0;
                let id = ShardId(i as u32);
                shards.push(Shard::new(id, Ownership::Arc { start, end }, owner));
                arcs.insert(end, id);
            }
            (shards, Routing::Arcs(arcs))
        }
    };
    ClusterState::new(nodes, shards, routing, hasher, keys)
}

/// Outcome of one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub arrival: SimTime,
    pub key: Key,
    pub op: Op,
    pub outcome: Outcome,
}

impl RequestRecord {
    pub fn latency(&self) -> Option<SimTime> {
        match self.outcome {
            Outcome::Served { latency, .. } => Some(latency),
            Outcome::Failed { .. } => None,
        }
    }
}

/// Cluster-level happenings recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ClusterEvent {
    NodeFail { node: NodeId },
    NodeRecover { node: NodeId },
    Corruption { node: NodeId, damaged: usize },
    PatternShift { index: usize },
    Rebalance { splits: usize, merges: usize, moves: usize, promotions: usize },
    Migration { ops: usize, moved: usize, copied: usize },
    ReplicaRepair { ops: usize, copied: usize },
    RegenPlanned { node: NodeId, steps: usize, max_depth: u8, unrecoverable: usize },
    RegenStep { node: NodeId, source: NodeId, restored: usize, requested: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: SimTime,
    #[serde(flatten)]
    pub event: ClusterEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub time: SimTime,
    pub kind: String,
    pub detail: String,
}

/// Replica placement checks made after every placement change.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementAudit {
    pub checks: u64,
    /// Two copies of one shard on one node.
    pub copy_collisions: u64,
    /// Two copies of one non-degraded shard in one region.
    pub region_collisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub key_count: u64,
    pub node_count: usize,
    pub bucket_width: SimTime,
    /// Clock at the end of the run.
    pub end: SimTime,
    pub requests: Vec<RequestRecord>,
    pub events: Vec<TraceEvent>,
    pub buckets: Vec<MetricBucket>,
    pub shift_times: Vec<SimTime>,
    /// Keys with no intact copy left when the trace was taken.
    pub lost_keys: usize,
    pub live_shards: usize,
    pub warnings: Vec<Warning>,
    pub audit: PlacementAudit,
}

struct OpenBucket {
    start: SimTime,
    total: u64,
    ok: u64,
    latencies: Vec<f64>,
    routed: Vec<u64>,
    live: usize,
    failure: bool,
    moved: u64,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    queue: EventQueue,
    state: ClusterState,
    controller: Option<Controller>,
    trace: SimTrace,
    bucket: OpenBucket,
    /// Pending regeneration steps per node.
    regen_active: BTreeMap<NodeId, usize>,
    degraded: BTreeSet<ShardId>,
    finished: bool,
}

impl Simulation {
    /// A run with nothing scheduled.
    pub fn empty(cfg: &ScenarioConfig, seed: u64) -> Result<Simulation> {
        let mut cfg = cfg.clone();
        cfg.validate()?;
        cfg.resolve();
        let state = initial_state(&cfg);
        let controller = (cfg.strategy == StrategyKind::Adaptive)
            .then(|| Controller::new(cfg.forecast.clone(), cfg.windows.clone(), cfg.replication.clone(), &state));
        let live = state.nodes.len();
        let trace = SimTrace {
            strategy: cfg.strategy,
            seed,
            key_count: state.key_count(),
            node_count: state.nodes.len(),
            bucket_width: cfg.bucket_time().max(SimTime::from_micros(1)),
            end: SimTime::ZERO,
            requests: Vec::new(),
            events: Vec::new(),
            buckets: Vec::new(),
            shift_times: Vec::new(),
            lost_keys: 0,
            live_shards: 0,
            warnings: Vec::new(),
            audit: PlacementAudit::default(),
        };
        let mut sim = Simulation {
            bucket: OpenBucket {
                start: SimTime::ZERO,
                total: 0,
                ok: 0,
                latencies: Vec::new(),
                routed: vec![0; live],
                live,
                failure: false,
                moved: 0,
            },
            cfg,
            queue: EventQueue::new(),
            state,
            controller,
            trace,
            regen_active: BTreeMap::new(),
            degraded: BTreeSet::new(),
            finished: false,
        };
        if sim.controller.is_some() {
            sim.repair_replicas(SimTime::ZERO)?;
        }
        Ok(sim)
    }

    /// A run with its workload, failures, shifts and maintenance ticks
    /// scheduled.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Simulation> {
        let mut sim = Simulation::empty(cfg, seed)?;
        let end = sim.cfg.duration_time();
        for r in workload_schedule(&sim.cfg, seed) {
            sim.schedule(r.arrival, EventKind::RequestArrival(r))?;
        }
        for (t, e) in failure_schedule(&sim.cfg, seed) {
            sim.schedule(t, e)?;
        }
        let shifts: Vec<SimTime> = sim
            .cfg
            .workload
            .shifts
            .iter()
            .map(|s| SimTime::from_secs_f64(s.at))
            .collect();
        for (i, &at) in shifts.iter().enumerate() {
            if at < end {
                sim.trace.shift_times.push(at);
                sim.schedule(at, EventKind::PatternShift { index: i + 1 })?;
            }
        }
        if sim.controller.is_some() {
            let tick = SimTime::from_secs_f64(sim.cfg.forecast.rebalance_interval);
            if tick < end {
                sim.schedule(tick, EventKind::ForecastTick)?;
            }
            let sync = SimTime::from_secs_f64(sim.cfg.replication.sync_interval);
            if sync < end {
                sim.schedule(sync, EventKind::SyncTick)?;
            }
        }
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64> {
        self.queue.schedule(time, kind)
    }

    /// Processes every event up to and including `t_end` (clamped to the
    /// configured duration) and leaves the clock at `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<&SimTrace> {
        let t_end = t_end.min(self.cfg.duration_time()).max(self.queue.now());
        while let Some(ev) = self.queue.pop_until(t_end) {
            self.roll_buckets(ev.time);
            self.handle(ev.time, ev.kind)?;
        }
        self.queue.advance_to(t_end);
        self.roll_buckets(t_end);
        self.trace.end = t_end;
        self.trace.lost_keys = self.state.lost_keys().len();
        self.trace.live_shards = self.state.live_shards().count();
        Ok(&self.trace)
    }

    /// Runs to the configured duration and closes the last partial bucket.
    pub fn finish(mut self) -> Result<SimTrace> {
        let end = self.cfg.duration_time();
        self.run_until(end)?;
        if !self.finished && self.bucket.start < end {
            self.close_bucket(end);
        }
        self.finished = true;
        Ok(self.trace)
    }

    fn roll_buckets(&mut self, t: SimTime) {
        let w = self.trace.bucket_width;
        while t >= self.bucket.start + w {
            let end = self.bucket.start + w;
            self.close_bucket(end);
        }
    }

    fn close_bucket(&mut self, end: SimTime) {
        let b = &mut self.bucket;
        let p95 = percentile(&mut b.latencies, 0.95);
        let loads: Vec<f64> = self
            .state
            .nodes
            .iter()
            .filter(|n| n.is_up())
            .map(|n| b.routed[n.id.index()] as f64)
            .collect();
        let replicas: Vec<f64> = self
            .state
            .live_shards()
            .flat_map(|s| s.copies.replicas.iter())
            .map(|r| r.staleness(end).as_secs_f64())
            .collect();
        let heat = self.controller.as_ref().map(|_| {
            let mut c = HeatCensus::default();
            for s in self.state.live_shards() {
                match classify_heat(&s.activity(), end, &self.cfg.windows) {
                    HeatTier::Hot => c.hot += 1,
                    HeatTier::Warm => c.warm += 1,
                    HeatTier::Cold => c.cold += 1,
                }
            }
            c
        });
        self.trace.buckets.push(MetricBucket {
            index: self.trace.buckets.len(),
            start: b.start,
            requests_total: b.total,
            requests_ok: b.ok,
            latency_sum: b.latencies.iter().sum(),
            latency_p95: p95,
            live_nodes: b.live,
            failure_active: b.failure,
            migration_moved: b.moved,
            load_cv: coefficient_of_variation(&loads),
            mean_staleness: if replicas.is_empty() {
                0.0
            } else {
                replicas.iter().sum::<f64>() / replicas.len() as f64
            },
            heat,
        });
        let up = self.state.nodes.iter().filter(|n| n.is_up()).count();
        let unhealthy = self.state.nodes.iter().any(|n| !n.is_up() || !n.damaged().is_empty());
        self.bucket = OpenBucket {
            start: end,
            total: 0,
            ok: 0,
            latencies: Vec::new(),
            routed: vec![0; self.state.nodes.len()],
            live: up,
            failure: unhealthy,
            moved: 0,
        };
    }

    fn log(&mut self, time: SimTime, event: ClusterEvent) {
        self.trace.events.push(TraceEvent { time, event });
    }

    fn warn(&mut self, time: SimTime, kind: &str, detail: String) {
        log::debug!("{kind} at {time}: {detail}");
        self.trace.warnings.push(Warning {
            time,
            kind: kind.to_string(),
            detail,
        });
    }

    /// Target for `req`: writes go to the primary; reads fail over to the
    /// least stale replica when the primary cannot serve the key.
    fn route(&self, req: &Request, now: SimTime) -> NodeId {
        let copies = &self.state.shard_of(req.key).copies;
        if req.op == Op::Write || self.state.intact_on(copies.primary, req.key) {
            return copies.primary;
        }
        failover(copies, now, |n| self.state.intact_on(n, req.key)).unwrap_or(copies.primary)
    }

    fn handle(&mut self, now: SimTime, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::RequestArrival(req) => {
                if let Some(c) = self.controller.as_mut() {
                    c.observe(req.key);
                }
                let target = self.route(&req, now);
                let outcome = self.state.serve(&req, target, now)?;
                let b = &mut self.bucket;
                b.total += 1;
                b.routed[target.index()] += 1;
                if let Outcome::Served { latency, .. } = outcome {
                    b.ok += 1;
                    b.latencies.push(latency.as_secs_f64());
                }
                self.trace.requests.push(RequestRecord {
                    arrival: now,
                    key: req.key,
                    op: req.op,
                    outcome,
                });
            }
            EventKind::NodeFail { node } => {
                self.state.node_mut(node).fail();
                self.bucket.failure = true;
                let up = self.state.nodes.iter().filter(|n| n.is_up()).count();
                self.bucket.live = self.bucket.live.min(up);
                self.log(now, ClusterEvent::NodeFail { node });
            }
            EventKind::NodeRecover { node } => {
                self.state.node_mut(node).recover();
                self.log(now, ClusterEvent::NodeRecover { node });
                self.plan_regen(node, now)?;
            }
            EventKind::Corruption {
                node,
                fraction,
                pick_seed,
            } => {
                let damaged = self.state.corrupt(node, fraction, pick_seed);
                if !damaged.is_empty() {
                    self.bucket.failure = true;
                }
                self.log(
                    now,
                    ClusterEvent::Corruption {
                        node,
                        damaged: damaged.len(),
                    },
                );
                self.plan_regen(node, now)?;
            }
            EventKind::SyncTick => {
                let state = &mut self.state;
                let up: Vec<bool> = state.nodes.iter().map(|n| n.is_up()).collect();
                for s in state.shards.iter_mut().filter(|s| !s.retired) {
                    sync_tick(&mut s.copies, now, |n| up[n.index()]);
                }
                let next = now + SimTime::from_secs_f64(self.cfg.replication.sync_interval);
                if next < self.cfg.duration_time() {
                    self.schedule(next, EventKind::SyncTick)?;
                }
            }
            EventKind::ForecastTick => {
                let Some(c) = self.controller.as_mut() else {
                    return Ok(());
                };
                let report = c.tick(&self.state, now)?;
                for &(id, tier) in &report.tiers {
                    self.state.shards[id.index()].heat = tier;
                }
                self.log(
                    now,
                    ClusterEvent::Rebalance {
                        splits: report.splits,
                        merges: report.merges,
                        moves: report.moves,
                        promotions: report.promotions,
                    },
                );
                if !report.plan.is_empty() {
                    self.schedule(now, EventKind::MigrationDone { plan: report.plan })?;
                }
                self.schedule(now, EventKind::RebalanceTick)?;
                let next = now + SimTime::from_secs_f64(self.cfg.forecast.rebalance_interval);
                if next < self.cfg.duration_time() {
                    self.schedule(next, EventKind::ForecastTick)?;
                }
            }
            EventKind::MigrationDone { plan } => {
                // Replicas are re-placed in the same step so no request sees
                // a half-updated placement.
                if self.apply_plan(&plan, now, true).is_some() {
                    self.repair_replicas(now)?;
                }
            }
            EventKind::RebalanceTick => {
                if self.controller.is_none() {
                    return Ok(());
                }
                self.repair_replicas(now)?;
                let pending: Vec<NodeId> = self
                    .state
                    .nodes
                    .iter()
                    .filter(|n| n.is_up() && !n.damaged().is_empty())
                    .map(|n| n.id)
                    .collect();
                for n in pending {
                    self.plan_regen(n, now)?;
                }
            }
            EventKind::PatternShift { index } => {
                self.log(now, ClusterEvent::PatternShift { index });
            }
            EventKind::RegenStep { step } => self.regen_step(step, now),
        }
        Ok(())
    }

    /// Applies a plan; a rejected plan leaves the cluster untouched.
    fn apply_plan(&mut self, plan: &MigrationPlan, now: SimTime, rebalance: bool) -> Option<(usize, usize)> {
        match self.state.apply_migration(plan) {
            Ok(out) => {
                if rebalance {
                    if let Some(c) = self.controller.as_mut() {
                        c.commit();
                    }
                    self.log(
                        now,
                        ClusterEvent::Migration {
                            ops: plan.ops.len(),
                            moved: out.moved,
                            copied: out.copied,
                        },
                    );
                }
                self.bucket.moved += out.moved as u64;
                Some((out.moved, out.copied))
            }
            Err(e) => {
                if rebalance {
                    if let Some(c) = self.controller.as_mut() {
                        c.discard();
                    }
                }
                self.warn(now, "MigrationRejected", e.to_string());
                None
            }
        }
    }

    fn repair_replicas(&mut self, now: SimTime) -> Result<()> {
        let Some(c) = self.controller.as_ref() else {
            return Ok(());
        };
        let (plan, degraded) = match c.replica_plan(&self.state, now) {
            Ok(p) => p,
            Err(Error::NoLiveNodes) => return Ok(()),
            Err(e) => return Err(e),
        };
        let now_degraded: BTreeSet<ShardId> = degraded.into_iter().collect();
        if !plan.is_empty() {
            if let Some((_, copied)) = self.apply_plan(&plan, now, false) {
                self.log(
                    now,
                    ClusterEvent::ReplicaRepair {
                        ops: plan.ops.len(),
                        copied,
                    },
                );
            }
        }
        for &s in now_degraded.difference(&self.degraded).copied().collect::<Vec<_>>().iter() {
            self.warn(now, "DegradedPlacement", format!("shard {s} placed below its replication policy"));
        }
        self.degraded = now_degraded;
        self.audit();
        Ok(())
    }

    fn audit(&mut self) {
        let a = &mut self.trace.audit;
        a.checks += 1;
        for s in self.state.live_shards() {
            let nodes: Vec<NodeId> = s.copies.nodes().collect();
            let distinct: BTreeSet<NodeId> = nodes.iter().copied().collect();
            if distinct.len() != nodes.len() {
                a.copy_collisions += 1;
            }
            if self.degraded.contains(&s.id) || self.cfg.regions < 2 {
                continue;
            }
            let regions: BTreeSet<RegionId> = nodes.iter().map(|&n| self.state.node(n).region).collect();
            if regions.len() != nodes.len() && self.cfg.replication.anti_affinity == crate::resilience::AntiAffinity::Region {
                a.region_collisions += 1;
            }
        }
    }

    fn plan_regen(&mut self, node: NodeId, now: SimTime) -> Result<()> {
        if self.controller.is_none() || !self.state.node(node).is_up() || self.regen_active.contains_key(&node) {
            return Ok(());
        }
        let damaged: Vec<(Key, u64)> = self
            .state
            .node(node)
            .damaged()
            .iter()
            .map(|&k| (k, self.state.key_hash(k)))
            .collect();
        if damaged.is_empty() {
            return Ok(());
        }
        let mut sources: BTreeMap<NodeId, BTreeSet<Key>> = BTreeMap::new();
        for &(k, _) in &damaged {
            for n in self.state.shard_of(k).copies.nodes() {
                if n != node && self.state.intact_on(n, k) {
                    sources.entry(n).or_default().insert(k);
                }
            }
        }
        if sources.is_empty() {
            return Ok(());
        }
        let rate = self
            .cfg
            .replication
            .repair_rate
            .unwrap_or(10.0 * self.state.node(node).capacity);
        let plan = regenerate(node, &damaged, &sources, rate);
        self.log(
            now,
            ClusterEvent::RegenPlanned {
                node,
                steps: plan.steps.len(),
                max_depth: plan.max_depth(),
                unrecoverable: plan.unrecoverable.len(),
            },
        );
        let parallelism = self.cfg.replication.repair_parallelism;
        let mut elapsed = 0.0;
        let n_steps = plan.steps.len();
        for step in plan.steps {
            elapsed += step.duration.as_secs_f64() / parallelism;
            self.schedule(now + SimTime::from_secs_f64(elapsed), EventKind::RegenStep { step })?;
        }
        if n_steps > 0 {
            self.regen_active.insert(node, n_steps);
        }
        Ok(())
    }

    /// Executes one copy step, re-checking that source and target are still
    /// valid; whatever it could not restore is re-planned at the next tick.
    fn regen_step(&mut self, step: RegenStep, now: SimTime) {
        let restored = if self.state.node(step.node).is_up() {
            self.state.restore(step.node, step.source, &step.keys)
        } else {
            0
        };
        self.log(
            now,
            ClusterEvent::RegenStep {
                node: step.node,
                source: step.source,
                restored,
                requested: step.keys.len(),
            },
        );
        if let Some(left) = self.regen_active.get_mut(&step.node) {
            *left -= 1;
            if *left == 0 {
                self.regen_active.remove(&step.node);
            }
        }
    }
}

/// Runs `cfg` to completion under `seed`.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<SimTrace> {
    Simulation::new(cfg, seed)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::FailureSpec;

    fn small(strategy: StrategyKind) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(4, 100.0, strategy);
        c.regions = 2;
        c.workload.key_count = 1000;
        c.workload.base_rate = Some(50.0);
        c.forecast.rebalance_interval = 10.0;
        c.replication.sync_interval = 5.0;
        c
    }

    #[test]
    fn nothing_scheduled_leaves_an_empty_trace() {
        let mut sim = Simulation::empty(&small(StrategyKind::Hash), 1).unwrap();
        let trace = sim.run_until(SimTime::from_secs(100)).unwrap();
        assert!(trace.requests.is_empty());
        assert!(trace.events.is_empty());
        assert_eq!(trace.end, SimTime::from_secs(100));
        assert_eq!(sim.now(), SimTime::from_secs(100));
    }

    #[test]
    fn every_arrival_gets_one_outcome() {
        let mut cfg = small(StrategyKind::Range);
        cfg.nodes = 1;
        cfg.regions = 1;
        let mut sim = Simulation::empty(&cfg, 1).unwrap();
        for i in 0..10u64 {
            let r = Request {
                key: i * 37,
                op: Op::Read,
                arrival: SimTime::from_secs(i),
            };
            sim.schedule(r.arrival, EventKind::RequestArrival(r)).unwrap();
        }
        let trace = sim.finish().unwrap();
        assert_eq!(trace.requests.len(), 10);
        assert!(trace.requests.iter().all(|r| r.outcome.is_ok()));
        let times: Vec<_> = trace.requests.iter().map(|r| r.arrival).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn past_events_are_refused() {
        let mut sim = Simulation::empty(&small(StrategyKind::Hash), 1).unwrap();
        sim.run_until(SimTime::from_secs(50)).unwrap();
        assert!(matches!(
            sim.schedule(SimTime::from_secs(10), EventKind::SyncTick),
            Err(Error::SchedulingInPast { .. })
        ));
    }

    #[test]
    fn same_seed_same_trace() {
        for s in StrategyKind::ALL {
            let mut cfg = small(s);
            cfg.failure = FailureSpec {
                crash_rate: 0.02,
                corruption_rate: 0.02,
                ..FailureSpec::default()
            };
            let a = run_scenario(&cfg, 9).unwrap();
            let b = run_scenario(&cfg, 9).unwrap();
            assert_eq!(a, b, "{s:?}");
        }
    }

    #[test]
    fn workload_is_shared_across_strategies() {
        let a: Vec<_> = run_scenario(&small(StrategyKind::Range), 4)
            .unwrap()
            .requests
            .iter()
            .map(|r| (r.arrival, r.key, r.op))
            .collect();
        let b: Vec<_> = run_scenario(&small(StrategyKind::Adaptive), 4)
            .unwrap()
            .requests
            .iter()
            .map(|r| (r.arrival, r.key, r.op))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn buckets_tile_the_run() {
        let trace = run_scenario(&small(StrategyKind::Consistent), 2).unwrap();
        assert_eq!(trace.buckets.len(), 10);
        let total: u64 = trace.buckets.iter().map(|b| b.requests_total).sum();
        assert_eq!(total as usize, trace.requests.len());
        for (i, b) in trace.buckets.iter().enumerate() {
            assert_eq!(b.index, i);
            assert!(b.requests_ok <= b.requests_total);
        }
    }

    #[test]
    fn adaptive_keeps_every_key_covered() {
        let mut cfg = small(StrategyKind::Adaptive);
        cfg.workload.zipf_exponent = 1.4;
        cfg.workload.base_rate = Some(300.0);
        cfg.failure.crash_rate = 0.02;
        let mut sim = Simulation::new(&cfg, 3).unwrap();
        for t in (10..=100).step_by(10) {
            sim.run_until(SimTime::from_secs(t)).unwrap();
            assert!(sim.state().check_key_coverage(), "at {t}s");
        }
        let trace = sim.finish().unwrap();
        assert_eq!(trace.audit.copy_collisions, 0);
        assert!(trace.events.iter().any(|e| matches!(e.event, ClusterEvent::Rebalance { .. })));
    }

    #[test]
    fn corruption_with_replicas_is_repaired() {
        let mut cfg = small(StrategyKind::Adaptive);
        cfg.replication.sync_interval = 1000.0;
        let mut sim = Simulation::empty(&cfg, 1).unwrap();
        sim.schedule(
            SimTime::from_secs(10),
            EventKind::Corruption {
                node: NodeId(0),
                fraction: 0.2,
                pick_seed: 5,
            },
        )
        .unwrap();
        let trace = sim.finish().unwrap();
        assert_eq!(trace.lost_keys, 0);
        assert!(trace.events.iter().any(|e| matches!(e.event, ClusterEvent::RegenPlanned { .. })));
        assert!(trace.events.iter().any(|e| matches!(e.event, ClusterEvent::RegenStep { .. })));
    }
}
