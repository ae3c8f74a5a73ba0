//! Cluster state: nodes, per-key metadata, shard placement and routing,
//! request service, migrations, and injected failures.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::adaptive::HeatTier;
use crate::error::{Error, Result};
use crate::event::EventKind;
use crate::ids::{Key, NodeId, RegionId, ShardId};
use crate::resilience::{NodeView, Replica, ReplicaSet};
use crate::rng::{rng_stream, RngStream};
use crate::strategies::{range_locate, KeyHasher, RangeTable};
use crate::time::SimTime;
use crate::workload::{Op, Request};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Requests per second each node serves.
    pub capacity: f64,
    /// Records a node may hold. Unset means three times an even share of all
    /// copies.
    pub storage_limit: Option<usize>,
    /// Requests a node queues before rejecting new ones.
    pub queue_limit: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            capacity: 100.0,
            storage_limit: None,
            queue_limit: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureSpec {
    /// Node crashes per second across the cluster.
    pub crash_rate: f64,
    /// Mean seconds a crashed node stays down (exponential).
    pub mean_downtime: f64,
    /// Corruption events per second across the cluster.
    pub corruption_rate: f64,
    /// Fraction of a node's records damaged by one corruption event.
    pub corruption_fraction: f64,
}

impl Default for FailureSpec {
    fn default() -> Self {
        FailureSpec {
            crash_rate: 0.0,
            mean_downtime: 60.0,
            corruption_rate: 0.0,
            corruption_fraction: 0.1,
        }
    }
}

/// Number of records one corruption event damages.
pub fn damaged_count(fraction: f64, records: usize) -> usize {
    ((fraction.clamp(0.0, 1.0) * records as f64).round() as usize).min(records)
}

/// The failure schedule of a run: node crashes as a Poisson process with a
/// uniformly chosen live victim, each followed by a recovery after an
/// exponential downtime, plus corruption events on uniformly chosen nodes.
/// Sorted by time.
pub fn inject_failures(
    spec: &FailureSpec,
    duration: SimTime,
    node_count: usize,
    rng: &mut RngStream,
) -> Vec<(SimTime, EventKind)> {
    assert!(node_count >= 1, "node_count must be >= 1");
    let mut out = Vec::new();
    let horizon = duration.as_secs_f64();

    let mut crashes = rng.fork("crash");
    if spec.crash_rate > 0.0 {
        let mut down_until = vec![0.0f64; node_count];
        let mut t = 0.0;
        loop {
            t += crashes.exponential(1.0 / spec.crash_rate);
            if t >= horizon {
                break;
            }
            let live: Vec<usize> = (0..node_count).filter(|&n| down_until[n] <= t).collect();
            if live.is_empty() {
                continue;
            }
            let victim = live[crashes.below(live.len() as u64) as usize];
            let back = t + crashes.exponential(spec.mean_downtime);
            down_until[victim] = back;
            let node = NodeId(victim as u32);
            let fail_at = SimTime::from_secs_f64(t);
            let mut recover_at = SimTime::from_secs_f64(back);
            if recover_at <= fail_at {
                recover_at = SimTime::from_micros(fail_at.as_micros() + 1);
            }
            out.push((fail_at, EventKind::NodeFail { node }));
            out.push((recover_at, EventKind::NodeRecover { node }));
        }
    }

    let mut corruptions = rng.fork("corruption");
    if spec.corruption_rate > 0.0 {
        let mut t = 0.0;
        loop {
            t += corruptions.exponential(1.0 / spec.corruption_rate);
            if t >= horizon {
                break;
            }
            let node = NodeId(corruptions.below(node_count as u64) as u32);
            out.push((
                SimTime::from_secs_f64(t),
                EventKind::Corruption {
                    node,
                    fraction: spec.corruption_fraction,
                    pick_seed: corruptions.next_u64(),
                },
            ));
        }
    }

    out.sort_by_key(|(t, _)| *t);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Up,
    Failed,
    /// Up, with some held records damaged.
    Degraded,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub region: RegionId,
    pub capacity: f64,
    pub storage_limit: usize,
    pub queue_limit: usize,
    up: bool,
    damaged: BTreeSet<Key>,
    in_flight: BinaryHeap<Reverse<SimTime>>,
}

impl Node {
    pub fn new(id: NodeId, region: RegionId, capacity: f64, storage_limit: usize, queue_limit: usize) -> Self {
        assert!(capacity > 0.0, "capacity must be positive");
        Node {
            id,
            region,
            capacity,
            storage_limit,
            queue_limit: queue_limit.max(1),
            up: true,
            damaged: BTreeSet::new(),
            in_flight: BinaryHeap::new(),
        }
    }

    pub fn status(&self) -> NodeStatus {
        if !self.up {
            NodeStatus::Failed
        } else if self.damaged.is_empty() {
            NodeStatus::Up
        } else {
            NodeStatus::Degraded
        }
    }

    pub fn is_up(&self) -> bool {
        self.up
    }

    pub fn damaged(&self) -> &BTreeSet<Key> {
        &self.damaged
    }

    pub fn is_damaged(&self, key: Key) -> bool {
        self.damaged.contains(&key)
    }

    /// Requests accepted and not yet completed as of the last drain.
    pub fn queue_len(&self) -> usize {
        self.in_flight.len()
    }

    fn drain(&mut self, now: SimTime) {
        while let Some(&Reverse(done)) = self.in_flight.peek() {
            if done > now {
                break;
            }
            self.in_flight.pop();
        }
    }

    /// Crash: queued work is lost, stored data survives.
    pub fn fail(&mut self) {
        self.up = false;
        self.in_flight.clear();
    }

    pub fn recover(&mut self) {
        self.up = true;
    }
}

/// Temporal metadata of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub key: Key,
    pub created_at: SimTime,
    pub last_access: SimTime,
    pub last_modified: SimTime,
    pub access_count: u64,
}

impl RecordMeta {
    pub fn new(key: Key, created_at: SimTime) -> Self {
        RecordMeta {
            key,
            created_at,
            last_access: created_at,
            last_modified: created_at,
            access_count: 0,
        }
    }

    pub fn last_touch(&self) -> SimTime {
        self.last_access.max(self.last_modified)
    }

    /// Writes bump the modification time and the counter; reads only the
    /// access time.
    pub fn record(&mut self, op: Op, now: SimTime) {
        match op {
            Op::Read => self.last_access = self.last_access.max(now),
            Op::Write => {
                self.last_modified = self.last_modified.max(now);
                self.access_count += 1;
            }
        }
    }
}

/// Which keys a shard owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Ownership {
    /// Keys in `[lo, hi)`.
    Range { lo: Key, hi: Key },
    /// Keys with `hash mod modulus == class`.
    HashClass { modulus: u32, class: u32 },
    /// Key hashes in the ring arc `(start, end]`; `start == end` is the whole ring.
    Arc { start: u64, end: u64 },
}

impl Ownership {
    pub fn contains(&self, key: Key, hash: u64) -> bool {
        match *self {
            Ownership::Range { lo, hi } => lo <= key && key < hi,
            Ownership::HashClass { modulus, class } => hash % modulus as u64 == class as u64,
            Ownership::Arc { start, end } => {
                if start == end {
                    true
                } else if start < end {
                    start < hash && hash <= end
                } else {
                    hash > start || hash <= end
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shard {
    pub id: ShardId,
    pub ownership: Ownership,
    pub heat: HeatTier,
    pub copies: ReplicaSet,
    pub record_count: usize,
    /// Merged away; the id is never reused.
    pub retired: bool,
    /// Latest access or modification of any member record.
    pub last_touch: SimTime,
}

impl Shard {
    pub fn new(id: ShardId, ownership: Ownership, primary: NodeId) -> Self {
        Shard {
            id,
            ownership,
            heat: HeatTier::Hot,
            copies: ReplicaSet::primary_only(id, primary),
            record_count: 0,
            retired: false,
            last_touch: SimTime::ZERO,
        }
    }

    pub fn primary(&self) -> NodeId {
        self.copies.primary
    }

    /// Metadata summarising the shard as one record.
    pub fn activity(&self) -> RecordMeta {
        RecordMeta {
            key: 0,
            created_at: SimTime::ZERO,
            last_access: self.last_touch,
            last_modified: self.last_touch,
            access_count: 0,
        }
    }
}

/// Key-to-shard routing.
#[derive(Debug, Clone, PartialEq)]
pub enum Routing {
    Range(RangeTable),
    /// Shard id equals the hash class.
    Hash { n_shards: u32 },
    /// Ring positions, each ending the arc of one shard.
    Arcs(BTreeMap<u64, ShardId>),
}

impl Routing {
    pub fn locate(&self, key: Key, hash: u64) -> ShardId {
        match self {
            Routing::Range(t) => range_locate(key, t),
            Routing::Hash { n_shards } => ShardId((hash % *n_shards as u64) as u32),
            Routing::Arcs(ring) => *ring
                .range(hash..)
                .next()
                .or_else(|| ring.iter().next())
                .map(|(_, s)| s)
                .expect("arc routing needs at least one position"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    NodeDown,
    DataUnavailable,
    Overloaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Served { node: NodeId, latency: SimTime },
    Failed { reason: FailReason },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Served { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MigrationOp {
    /// Hand the shard's primary role to `to`.
    Move { shard: ShardId, to: NodeId },
    SetReplicas { shard: ShardId, replicas: Vec<Replica> },
    /// Carve child arcs out of an arc-owned shard. Child `i` ends at
    /// `cuts[i]` and is led by `primaries[i]`; the parent keeps the rest.
    Split {
        shard: ShardId,
        cuts: Vec<u64>,
        primaries: Vec<NodeId>,
    },
    /// Fold an arc into the clockwise-adjacent arc `into`.
    Merge { shard: ShardId, into: ShardId },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationPlan {
    pub ops: Vec<MigrationOp>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationOutcome {
    /// Records whose new primary did not hold them before.
    pub moved: usize,
    /// Records copied to new replica holders.
    pub copied: usize,
    /// Shards created by splits.
    pub new_shards: Vec<ShardId>,
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub nodes: Vec<Node>,
    pub shards: Vec<Shard>,
    pub routing: Routing,
    pub hasher: KeyHasher,
    key_hash: Vec<u64>,
    key_shard: Vec<ShardId>,
    records: Vec<RecordMeta>,
}

impl ClusterState {
    pub fn new(nodes: Vec<Node>, shards: Vec<Shard>, routing: Routing, hasher: KeyHasher, key_count: u64) -> Self {
        let key_hash: Vec<u64> = (0..key_count).map(|k| hasher.hash_key(k)).collect();
        let mut state = ClusterState {
            nodes,
            shards,
            routing,
            hasher,
            key_hash,
            key_shard: Vec::new(),
            records: (0..key_count).map(|k| RecordMeta::new(k, SimTime::ZERO)).collect(),
        };
        state.reindex();
        state
    }

    pub fn key_count(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn key_hash(&self, key: Key) -> u64 {
        self.key_hash[key as usize]
    }

    pub fn record(&self, key: Key) -> &RecordMeta {
        &self.records[key as usize]
    }

    pub fn shard_id_of(&self, key: Key) -> ShardId {
        self.key_shard[key as usize]
    }

    pub fn shard_of(&self, key: Key) -> &Shard {
        &self.shards[self.key_shard[key as usize].index()]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn live_shards(&self) -> impl Iterator<Item = &Shard> {
        self.shards.iter().filter(|s| !s.retired)
    }

    /// Keys of each shard, indexed by shard id.
    pub fn members(&self) -> Vec<Vec<Key>> {
        let mut out = vec![Vec::new(); self.shards.len()];
        for (k, s) in self.key_shard.iter().enumerate() {
            out[s.index()].push(k as Key);
        }
        out
    }

    fn reindex(&mut self) {
        self.key_shard = (0..self.key_count())
            .map(|k| self.routing.locate(k, self.key_hash[k as usize]))
            .collect();
        for s in &mut self.shards {
            s.record_count = 0;
        }
        for s in &self.key_shard {
            self.shards[s.index()].record_count += 1;
        }
    }

    pub fn holds(&self, node: NodeId, key: Key) -> bool {
        self.shard_of(key).copies.holds(node)
    }

    /// Keys stored on `node`, ascending.
    pub fn held_keys(&self, node: NodeId) -> Vec<Key> {
        (0..self.key_count()).filter(|&k| self.holds(node, k)).collect()
    }

    /// Records stored per node, primaries and replicas alike.
    pub fn held_counts(&self) -> Vec<usize> {
        held_counts(&self.shards, self.nodes.len())
    }

    /// Whether `node` can serve `key` right now.
    pub fn intact_on(&self, node: NodeId, key: Key) -> bool {
        let n = self.node(node);
        n.up && !n.damaged.contains(&key) && self.holds(node, key)
    }

    pub fn node_views(&self) -> Vec<NodeView> {
        let counts = self.held_counts();
        self.nodes
            .iter()
            .map(|n| NodeView {
                id: n.id,
                region: n.region,
                up: n.up,
                load: counts[n.id.index()],
            })
            .collect()
    }

    /// Keys with no undamaged copy on any holder, live or not.
    pub fn lost_keys(&self) -> Vec<Key> {
        (0..self.key_count())
            .filter(|&k| self.shard_of(k).copies.nodes().all(|n| self.node(n).damaged.contains(&k)))
            .collect()
    }

    /// Every key maps to exactly one live shard whose ownership contains it.
    pub fn check_key_coverage(&self) -> bool {
        (0..self.key_count()).all(|k| {
            let s = self.shard_of(k);
            !s.retired && s.ownership.contains(k, self.key_hash(k))
        })
    }

    /// Serves `req` on `target`. Latency is `(queue + 1) / capacity` with the
    /// queue drained of everything completed by `now`.
    pub fn serve(&mut self, req: &Request, target: NodeId, now: SimTime) -> Result<Outcome> {
        if !self.holds(target, req.key) {
            return Err(Error::UnknownKey {
                key: req.key,
                node: target,
            });
        }
        let node = &mut self.nodes[target.index()];
        if !node.up {
            return Ok(Outcome::Failed {
                reason: FailReason::NodeDown,
            });
        }
        if node.damaged.contains(&req.key) {
            return Ok(Outcome::Failed {
                reason: FailReason::DataUnavailable,
            });
        }
        node.drain(now);
        let queued = node.in_flight.len();
        if queued >= node.queue_limit {
            return Ok(Outcome::Failed {
                reason: FailReason::Overloaded,
            });
        }
        let latency = SimTime::from_secs_f64((queued + 1) as f64 / node.capacity);
        node.in_flight.push(Reverse(now + latency));
        self.records[req.key as usize].record(req.op, now);
        let shard = self.key_shard[req.key as usize];
        let s = &mut self.shards[shard.index()];
        s.last_touch = s.last_touch.max(now);
        Ok(Outcome::Served {
            node: target,
            latency,
        })
    }

    /// Damages `round(fraction · held)` of `node`'s records, chosen uniformly
    /// with a stream seeded by `pick_seed`. Returns the newly damaged keys.
    pub fn corrupt(&mut self, node: NodeId, fraction: f64, pick_seed: u64) -> Vec<Key> {
        let held = self.held_keys(node);
        let count = damaged_count(fraction, held.len());
        let mut rng = rng_stream(pick_seed, "corruption.pick");
        let mut picked: Vec<Key> = sample(rng.inner(), held.len(), count)
            .into_iter()
            .map(|i| held[i])
            .collect();
        picked.sort_unstable();
        let n = &mut self.nodes[node.index()];
        picked.retain(|k| n.damaged.insert(*k));
        picked
    }

    /// Marks `keys` intact again on `node`; only keys the node still holds
    /// and that are intact on `source` are repaired. Returns how many were.
    pub fn restore(&mut self, node: NodeId, source: NodeId, keys: &[Key]) -> usize {
        let ok: Vec<Key> = keys
            .iter()
            .copied()
            .filter(|&k| self.holds(node, k) && self.intact_on(source, k))
            .collect();
        let n = &mut self.nodes[node.index()];
        ok.iter().filter(|k| n.damaged.remove(k)).count()
    }

    /// Applies `plan` atomically. A plan that would push any node past its
    /// storage limit is rejected and leaves the state untouched.
    pub fn apply_migration(&mut self, plan: &MigrationPlan) -> Result<MigrationOutcome> {
        if plan.is_empty() {
            return Ok(MigrationOutcome::default());
        }
        let mut shards = self.shards.clone();
        let mut routing = self.routing.clone();
        let mut new_shards = Vec::new();

        for op in &plan.ops {
            match op {
                MigrationOp::Move { shard, to } => {
                    self.check_node(*to)?;
                    let s = live_mut(&mut shards, *shard)?;
                    if s.copies.primary != *to {
                        s.copies.replicas.retain(|r| r.node != *to);
                        s.copies.primary = *to;
                    }
                }
                MigrationOp::SetReplicas { shard, replicas } => {
                    for r in replicas {
                        self.check_node(r.node)?;
                    }
                    let s = live_mut(&mut shards, *shard)?;
                    let mut seen = BTreeSet::new();
                    if replicas.iter().any(|r| r.node == s.copies.primary || !seen.insert(r.node)) {
                        return Err(Error::InvalidPlan(format!("replicas of {shard} must be distinct from each other and the primary")));
                    }
                    s.copies.replicas = replicas.clone();
                }
                MigrationOp::Split {
                    shard,
                    cuts,
                    primaries,
                } => {
                    if cuts.is_empty() || cuts.len() != primaries.len() {
                        return Err(Error::InvalidPlan(format!("split of {shard} needs one primary per cut")));
                    }
                    for p in primaries {
                        self.check_node(*p)?;
                    }
                    let Routing::Arcs(ring) = &mut routing else {
                        return Err(Error::InvalidPlan("only arc-owned shards split".into()));
                    };
                    let parent = live_mut(&mut shards, *shard)?.clone();
                    let Ownership::Arc { start, end } = parent.ownership else {
                        return Err(Error::InvalidPlan("only arc-owned shards split".into()));
                    };
                    let probe = Ownership::Arc { start, end };
                    let mut prev = start;
                    for (&cut, &primary) in cuts.iter().zip(primaries) {
                        let next_len = cut.wrapping_sub(start);
                        let in_order = next_len > prev.wrapping_sub(start);
                        if cut == end || ring.contains_key(&cut) || !probe.contains(0, cut) || !in_order {
                            return Err(Error::InvalidPlan(format!("bad cut point in split of {shard}")));
                        }
                        let id = ShardId(shards.len() as u32);
                        let mut child = Shard::new(id, Ownership::Arc { start: prev, end: cut }, primary);
                        child.heat = parent.heat;
                        child.last_touch = parent.last_touch;
                        child.copies.replicas = parent
                            .copies
                            .replicas
                            .iter()
                            .filter(|r| r.node != primary)
                            .copied()
                            .collect();
                        ring.insert(cut, id);
                        shards.push(child);
                        new_shards.push(id);
                        prev = cut;
                    }
                    let p = live_mut(&mut shards, *shard)?;
                    p.ownership = Ownership::Arc { start: prev, end };
                }
                MigrationOp::Merge { shard, into } => {
                    let Routing::Arcs(ring) = &mut routing else {
                        return Err(Error::InvalidPlan("only arc-owned shards merge".into()));
                    };
                    let src = live_mut(&mut shards, *shard)?.clone();
                    let dst = live_mut(&mut shards, *into)?;
                    let (Ownership::Arc { start: s0, end: s1 }, Ownership::Arc { start: d0, end: d1 }) =
                        (src.ownership, dst.ownership)
                    else {
                        return Err(Error::InvalidPlan("only arc-owned shards merge".into()));
                    };
                    if d0 != s1 || shard == into || s0 == s1 {
                        return Err(Error::InvalidPlan(format!("{shard} is not adjacent to {into}")));
                    }
                    dst.ownership = Ownership::Arc { start: s0, end: d1 };
                    dst.last_touch = dst.last_touch.max(src.last_touch);
                    dst.heat = dst.heat.max(src.heat);
                    ring.remove(&s1);
                    let s = live_mut(&mut shards, *shard)?;
                    s.retired = true;
                    s.copies.replicas.clear();
                }
            }
        }

        // Re-route every key under the new layout.
        let key_shard: Vec<ShardId> = (0..self.key_count())
            .map(|k| routing.locate(k, self.key_hash[k as usize]))
            .collect();
        for s in &mut shards {
            s.record_count = 0;
        }
        for s in &key_shard {
            shards[s.index()].record_count += 1;
        }

        let before = self.held_counts();
        let after = held_counts(&shards, self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if after[i] > before[i] && after[i] > n.storage_limit {
                return Err(Error::TargetOverCapacity {
                    node: n.id,
                    records: after[i],
                    limit: n.storage_limit,
                });
            }
        }

        // Count movement and carry damage over to the new holders.
        let mut moved = 0;
        let mut copied = 0;
        let mut gained: Vec<(NodeId, Key)> = Vec::new();
        let mut dropped: Vec<(NodeId, Key)> = Vec::new();
        for k in 0..self.key_count() {
            let old = &self.shards[self.key_shard[k as usize].index()].copies;
            let new = &shards[key_shard[k as usize].index()].copies;
            if !old.holds(new.primary) {
                moved += 1;
            }
            let intact_source = old.nodes().any(|n| {
                let node = &self.nodes[n.index()];
                node.up && !node.damaged.contains(&k)
            });
            for n in new.nodes() {
                if !old.holds(n) {
                    copied += usize::from(new.primary != n);
                    if !intact_source {
                        gained.push((n, k));
                    }
                }
            }
            for n in old.nodes() {
                if !new.holds(n) {
                    dropped.push((n, k));
                }
            }
        }
        for (n, k) in dropped {
            self.nodes[n.index()].damaged.remove(&k);
        }
        for (n, k) in gained {
            self.nodes[n.index()].damaged.insert(k);
        }

        self.shards = shards;
        self.routing = routing;
        self.key_shard = key_shard;
        debug_assert!(self.check_key_coverage());
        Ok(MigrationOutcome {
            moved,
            copied,
            new_shards,
        })
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::InvalidPlan(format!("unknown node {node}")))
        }
    }
}

fn live_mut(shards: &mut [Shard], id: ShardId) -> Result<&mut Shard> {
    match shards.get_mut(id.index()) {
        Some(s) if !s.retired => Ok(s),
        _ => Err(Error::UnknownShard(id)),
    }
}

fn held_counts(shards: &[Shard], node_count: usize) -> Vec<usize> {
    let mut counts = vec![0; node_count];
    for s in shards.iter().filter(|s| !s.retired) {
        for n in s.copies.nodes() {
            counts[n.index()] += s.record_count;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::RangeTable;

    /// Two nodes, keys `0..200` in two range shards of 100 on nodes 0 and 1.
    fn two_ranges(storage: usize) -> ClusterState {
        let nodes = (0..2)
            .map(|i| Node::new(NodeId(i), RegionId(i), 100.0, storage, 10))
            .collect();
        let table = RangeTable::equal_width(200, 2);
        let shards = vec![
            Shard::new(ShardId(0), Ownership::Range { lo: 0, hi: 100 }, NodeId(0)),
            Shard::new(ShardId(1), Ownership::Range { lo: 100, hi: 200 }, NodeId(1)),
        ];
        ClusterState::new(nodes, shards, Routing::Range(table), KeyHasher::new(0), 200)
    }

    fn read(key: Key) -> Request {
        Request {
            key,
            op: Op::Read,
            arrival: SimTime::ZERO,
        }
    }

    #[test]
    fn empty_queue_latency_is_one_service_time() {
        let mut c = two_ranges(1000);
        let out = c.serve(&read(3), NodeId(0), SimTime::ZERO).unwrap();
        assert_eq!(
            out,
            Outcome::Served {
                node: NodeId(0),
                latency: SimTime::from_secs_f64(0.01)
            }
        );
    }

    #[test]
    fn queue_grows_then_drains() {
        let mut c = two_ranges(1000);
        let t = SimTime::ZERO;
        c.serve(&read(1), NodeId(0), t).unwrap();
        let second = c.serve(&read(2), NodeId(0), t).unwrap();
        assert_eq!(
            second,
            Outcome::Served {
                node: NodeId(0),
                latency: SimTime::from_secs_f64(0.02)
            }
        );
        assert_eq!(c.node(NodeId(0)).queue_len(), 2);
        // Both complete by 0.02 s; the next request sees an empty queue.
        let later = c.serve(&read(3), NodeId(0), SimTime::from_secs_f64(0.02)).unwrap();
        assert_eq!(
            later,
            Outcome::Served {
                node: NodeId(0),
                latency: SimTime::from_secs_f64(0.01)
            }
        );
    }

    #[test]
    fn full_queue_rejects() {
        let mut c = two_ranges(1000);
        for k in 0..10 {
            assert!(c.serve(&read(k), NodeId(0), SimTime::ZERO).unwrap().is_ok());
        }
        assert_eq!(
            c.serve(&read(10), NodeId(0), SimTime::ZERO).unwrap(),
            Outcome::Failed {
                reason: FailReason::Overloaded
            }
        );
    }

    #[test]
    fn failed_node_serves_nothing() {
        let mut c = two_ranges(1000);
        c.node_mut(NodeId(0)).fail();
        assert_eq!(c.node(NodeId(0)).status(), NodeStatus::Failed);
        assert_eq!(
            c.serve(&read(5), NodeId(0), SimTime::ZERO).unwrap(),
            Outcome::Failed {
                reason: FailReason::NodeDown
            }
        );
    }

    #[test]
    fn damaged_key_is_unavailable() {
        let mut c = two_ranges(1000);
        let damaged = c.corrupt(NodeId(0), 0.5, 7);
        assert_eq!(damaged.len(), 50);
        assert_eq!(c.node(NodeId(0)).status(), NodeStatus::Degraded);
        let bad = damaged[0];
        let good = (0..100).find(|k| !damaged.contains(k)).unwrap();
        assert_eq!(
            c.serve(&read(bad), NodeId(0), SimTime::ZERO).unwrap(),
            Outcome::Failed {
                reason: FailReason::DataUnavailable
            }
        );
        assert!(c.serve(&read(good), NodeId(0), SimTime::ZERO).unwrap().is_ok());
    }

    #[test]
    fn misrouted_request_is_an_error() {
        let mut c = two_ranges(1000);
        assert_eq!(
            c.serve(&read(150), NodeId(0), SimTime::ZERO),
            Err(Error::UnknownKey {
                key: 150,
                node: NodeId(0)
            })
        );
    }

    #[test]
    fn serving_updates_metadata() {
        let mut c = two_ranges(1000);
        let t = SimTime::from_secs(5);
        c.serve(&read(4), NodeId(0), t).unwrap();
        let w = Request {
            key: 4,
            op: Op::Write,
            arrival: t,
        };
        c.serve(&w, NodeId(0), SimTime::from_secs(6)).unwrap();
        let m = c.record(4);
        assert_eq!(m.last_access, t);
        assert_eq!(m.last_modified, SimTime::from_secs(6));
        assert_eq!(m.access_count, 1);
        assert!(m.created_at <= m.last_access && m.created_at <= m.last_modified);
    }

    #[test]
    fn empty_plan_is_a_noop() {
        let mut c = two_ranges(1000);
        let before = c.shards.clone();
        assert_eq!(c.apply_migration(&MigrationPlan::default()).unwrap().moved, 0);
        assert_eq!(c.shards, before);
    }

    #[test]
    fn moving_a_shard_moves_its_records() {
        let mut c = two_ranges(1000);
        let plan = MigrationPlan {
            ops: vec![MigrationOp::Move {
                shard: ShardId(0),
                to: NodeId(1),
            }],
        };
        assert_eq!(c.apply_migration(&plan).unwrap().moved, 100);
        assert_eq!(c.held_counts(), vec![0, 200]);
        assert!(c.check_key_coverage());
    }

    #[test]
    fn over_capacity_plan_is_rejected_untouched() {
        let mut c = two_ranges(150);
        let before = c.shards.clone();
        let plan = MigrationPlan {
            ops: vec![MigrationOp::Move {
                shard: ShardId(0),
                to: NodeId(1),
            }],
        };
        assert!(matches!(
            c.apply_migration(&plan),
            Err(Error::TargetOverCapacity { node: NodeId(1), .. })
        ));
        assert_eq!(c.shards, before);
    }

    #[test]
    fn unknown_shard_is_rejected() {
        let mut c = two_ranges(1000);
        let plan = MigrationPlan {
            ops: vec![MigrationOp::Move {
                shard: ShardId(9),
                to: NodeId(1),
            }],
        };
        assert_eq!(c.apply_migration(&plan), Err(Error::UnknownShard(ShardId(9))));
    }

    #[test]
    fn promotion_to_a_replica_moves_nothing() {
        let mut c = two_ranges(1000);
        let plan = MigrationPlan {
            ops: vec![MigrationOp::SetReplicas {
                shard: ShardId(0),
                replicas: vec![Replica {
                    node: NodeId(1),
                    synced_at: SimTime::ZERO,
                }],
            }],
        };
        let out = c.apply_migration(&plan).unwrap();
        assert_eq!((out.moved, out.copied), (0, 100));
        let promote = MigrationPlan {
            ops: vec![MigrationOp::Move {
                shard: ShardId(0),
                to: NodeId(1),
            }],
        };
        assert_eq!(c.apply_migration(&promote).unwrap().moved, 0);
        assert!(c.shards[0].copies.replicas.is_empty());
    }

    fn ring_cluster() -> ClusterState {
        let nodes = (0..2)
            .map(|i| Node::new(NodeId(i), RegionId(0), 100.0, 10_000, 10))
            .collect();
        let half = 1u64 << 63;
        let shards = vec![
            Shard::new(ShardId(0), Ownership::Arc { start: half, end: 0 }, NodeId(0)),
            Shard::new(ShardId(1), Ownership::Arc { start: 0, end: half }, NodeId(1)),
        ];
        let arcs = [(0, ShardId(0)), (half, ShardId(1))].into();
        ClusterState::new(nodes, shards, Routing::Arcs(arcs), KeyHasher::new(3), 1000)
    }

    #[test]
    fn split_moves_only_keys_of_relocated_children() {
        let mut c = ring_cluster();
        let before: Vec<ShardId> = (0..1000).map(|k| c.shard_id_of(k)).collect();
        let cut = 1u64 << 62;
        let plan = MigrationPlan {
            ops: vec![MigrationOp::Split {
                shard: ShardId(1),
                cuts: vec![cut],
                primaries: vec![NodeId(0)],
            }],
        };
        let out = c.apply_migration(&plan).unwrap();
        assert_eq!(out.new_shards, vec![ShardId(2)]);
        assert!(c.check_key_coverage());
        let expected = (0..1000)
            .filter(|&k| {
                let h = c.key_hash(k);
                before[k as usize] == ShardId(1) && h > 0 && h <= cut
            })
            .count();
        assert_eq!(out.moved, expected);
        assert_eq!(c.shards[2].record_count, expected);
    }

    #[test]
    fn merge_restores_the_arc() {
        let mut c = ring_cluster();
        let cut = 1u64 << 62;
        c.apply_migration(&MigrationPlan {
            ops: vec![MigrationOp::Split {
                shard: ShardId(1),
                cuts: vec![cut],
                primaries: vec![NodeId(1)],
            }],
        })
        .unwrap();
        let out = c
            .apply_migration(&MigrationPlan {
                ops: vec![MigrationOp::Merge {
                    shard: ShardId(2),
                    into: ShardId(1),
                }],
            })
            .unwrap();
        assert_eq!(out.moved, 0);
        assert!(c.shards[2].retired);
        assert_eq!(c.shards[1].ownership, Ownership::Arc { start: 0, end: 1 << 63 });
        assert!(c.check_key_coverage());
    }

    #[test]
    fn merge_requires_adjacency() {
        let mut c = ring_cluster();
        let e = c.apply_migration(&MigrationPlan {
            ops: vec![MigrationOp::Merge {
                shard: ShardId(1),
                into: ShardId(1),
            }],
        });
        assert!(matches!(e, Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn no_failures_configured_means_none_injected() {
        let mut rng = rng_stream(1, "failures");
        assert!(inject_failures(&FailureSpec::default(), SimTime::from_secs(10_000), 8, &mut rng).is_empty());
    }

    #[test]
    fn crashes_are_poisson_and_paired() {
        let spec = FailureSpec {
            crash_rate: 0.01,
            ..FailureSpec::default()
        };
        let mut rng = rng_stream(5, "failures");
        let events = inject_failures(&spec, SimTime::from_secs(10_000), 16, &mut rng);
        let fails: Vec<_> = events
            .iter()
            .filter_map(|(t, e)| match e {
                EventKind::NodeFail { node } => Some((*t, *node)),
                _ => None,
            })
            .collect();
        // Mean 100, sd 10.
        assert!((70..=130).contains(&fails.len()), "{}", fails.len());
        for (t, node) in fails {
            let recoveries = events
                .iter()
                .filter(|(r, e)| *r > t && matches!(e, EventKind::NodeRecover { node: n } if *n == node))
                .count();
            assert!(recoveries >= 1);
        }
        let fails = events.iter().filter(|(_, e)| matches!(e, EventKind::NodeFail { .. })).count();
        let recovers = events.iter().filter(|(_, e)| matches!(e, EventKind::NodeRecover { .. })).count();
        assert_eq!(fails, recovers);
    }

    #[test]
    fn corruption_damages_rounded_fraction() {
        assert_eq!(damaged_count(0.1, 1000), 100);
        assert_eq!(damaged_count(0.0125, 1000), 13);
        assert_eq!(damaged_count(1.0, 7), 7);
        let nodes = vec![Node::new(NodeId(0), RegionId(0), 10.0, 5000, 10)];
        let shards = vec![Shard::new(ShardId(0), Ownership::Range { lo: 0, hi: 1000 }, NodeId(0))];
        let mut c = ClusterState::new(
            nodes,
            shards,
            Routing::Range(RangeTable::equal_width(1000, 1)),
            KeyHasher::new(0),
            1000,
        );
        assert_eq!(c.corrupt(NodeId(0), 0.1, 99).len(), 100);
    }

    #[test]
    fn lost_keys_need_every_copy_damaged() {
        let mut c = two_ranges(1000);
        c.apply_migration(&MigrationPlan {
            ops: vec![MigrationOp::SetReplicas {
                shard: ShardId(0),
                replicas: vec![Replica {
                    node: NodeId(1),
                    synced_at: SimTime::ZERO,
                }],
            }],
        })
        .unwrap();
        c.corrupt(NodeId(0), 1.0, 1);
        assert!(c.lost_keys().iter().all(|&k| k >= 100));
        // Shard 1 has no replica: corrupting node 1 loses its keys only.
        let hit = c.corrupt(NodeId(1), 0.1, 2);
        let lost = c.lost_keys();
        assert!(lost.iter().all(|k| hit.contains(k)));
        assert!(hit.iter().filter(|&&k| k < 100).all(|k| lost.contains(k)));
    }
}
