//! The rebalance loop run by the simulator on every forecast tick.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    classify_heat, forecast, dyadic_scales, fractal_dimension, plan_reshard, split_cuts, target_shard_size, temporal_assign,
    ArcShard, ForecastConfig, HeatTier, LoadHistory, NodeSlot, ReshardPlan, ShardDemand, WindowConfig,
};
use crate::cluster::{ClusterState, MigrationOp, MigrationPlan, Ownership, Routing};
use crate::error::Result;
use crate::ids::{Key, NodeId, ShardId};
use crate::resilience::{place_replicas, ReplicationPolicy};
use crate::time::SimTime;

/// What one tick decided.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub plan: MigrationPlan,
    pub tiers: Vec<(ShardId, HeatTier)>,
    pub splits: usize,
    pub merges: usize,
    pub moves: usize,
    pub promotions: usize,
}

/// A shard as the planner sees it after this tick's splits and merges.
#[derive(Debug, Clone)]
struct Unit {
    id: ShardId,
    primary: NodeId,
    load: f64,
    records: usize,
    tier: HeatTier,
    pinned: bool,
}

#[derive(Debug, Clone)]
pub struct Controller {
    forecast: ForecastConfig,
    windows: WindowConfig,
    policy: ReplicationPolicy,
    base_size: u64,
    /// Requests per key since the last tick.
    hits: Vec<u32>,
    histories: BTreeMap<ShardId, LoadHistory>,
    /// Histories matching the last plan, adopted once it is applied.
    pending: Option<BTreeMap<ShardId, LoadHistory>>,
    last_tick: SimTime,
}

impl Controller {
    pub fn new(forecast: ForecastConfig, windows: WindowConfig, policy: ReplicationPolicy, state: &ClusterState) -> Self {
        let live = state.live_shards().count().max(1) as u64;
        let base_size = forecast
            .base_shard_size
            .unwrap_or_else(|| (4 * state.key_count()).div_ceil(live))
            .max(1);
        Controller {
            forecast,
            windows,
            policy,
            base_size,
            hits: vec![0; state.key_count() as usize],
            histories: BTreeMap::new(),
            pending: None,
            last_tick: SimTime::ZERO,
        }
    }

    pub fn base_size(&self) -> u64 {
        self.base_size
    }

    pub fn observe(&mut self, key: Key) {
        self.hits[key as usize] += 1;
    }

    /// Adopts the histories of the last plan. Call after it was applied.
    pub fn commit(&mut self) {
        if let Some(h) = self.pending.take() {
            self.histories = h;
        }
    }

    /// Forgets the last plan's histories; the plan was rejected.
    pub fn discard(&mut self) {
        self.pending = None;
    }

    /// Records the interval's load, then plans splits, merges, shedding off
    /// overloaded nodes and promotion off failed primaries.
    pub fn tick(&mut self, state: &ClusterState, now: SimTime) -> Result<TickReport> {
        let secs = now.saturating_sub(self.last_tick).as_secs_f64().max(1e-6);
        self.last_tick = now;
        let hits = std::mem::replace(&mut self.hits, vec![0; state.key_count() as usize]);
        let mut report = TickReport::default();
        let Routing::Arcs(ring) = &state.routing else {
            return Ok(report);
        };

        let members = state.members();
        let mut histories = BTreeMap::new();
        let mut predicted = vec![0.0; state.shards.len()];
        for s in state.live_shards() {
            let obs = members[s.id.index()].iter().map(|&k| hits[k as usize] as f64).sum::<f64>() / secs;
            let mut h = self
                .histories
                .get(&s.id)
                .cloned()
                .unwrap_or_else(|| LoadHistory::new(self.forecast.history_len));
            h.push(now, obs);
            predicted[s.id.index()] = forecast(&h, &self.forecast).unwrap_or(obs);
            histories.insert(s.id, h);
            let tier = classify_heat(&s.activity(), now, &self.windows);
            report.tiers.push((s.id, tier));
        }
        let tier_of: BTreeMap<ShardId, HeatTier> = report.tiers.iter().copied().collect();

        // Shard size budget per node, from how its keys fill the hash space.
        let mut points: Vec<Vec<f64>> = vec![Vec::new(); state.nodes.len()];
        for s in state.live_shards() {
            let p = &mut points[s.primary().index()];
            p.extend(members[s.id.index()].iter().map(|&k| state.hasher.unit(k)));
        }
        let scales = dyadic_scales(self.forecast.fractal_scales);
        let budget: Vec<u64> = points
            .iter()
            .map(|p| {
                let d = fractal_dimension(p, &scales).map_or(1.0, |e| e.dimension);
                target_shard_size(d, self.base_size).max(1)
            })
            .collect();

        let order: Vec<ShardId> = ring.values().copied().collect();
        let mut positions = ring.clone();
        let mut claimed = BTreeSet::new();
        let mut units: Vec<Unit> = Vec::new();
        let mut next_id = state.shards.len() as u32;
        for (i, &id) in order.iter().enumerate() {
            if !claimed.insert(id) {
                continue;
            }
            let s = &state.shards[id.index()];
            let Ownership::Arc { start, end } = s.ownership else {
                continue;
            };
            let primary = s.primary();
            let arc = ArcShard {
                shard: id,
                start,
                end,
                records: s.record_count,
                prediction: predicted[id.index()],
            };
            let budget = budget[primary.index()] as usize;
            let sibling = order.get(i + 1).map(|&n| &state.shards[n.index()]).and_then(|n| {
                let Ownership::Arc { start, end } = n.ownership else {
                    return None;
                };
                (n.primary() == primary && !claimed.contains(&n.id) && s.record_count + n.record_count <= budget).then_some(
                    ArcShard {
                        shard: n.id,
                        start,
                        end,
                        records: n.record_count,
                        prediction: predicted[n.id.index()],
                    },
                )
            });
            let capacity = state.node(primary).capacity;
            let mut plan = plan_reshard(&arc, capacity, &positions, &self.forecast, sibling.as_ref());
            if plan == ReshardPlan::Keep && s.record_count > budget && s.record_count >= 2 {
                let k = s.record_count.div_ceil(budget);
                if let Some(cuts) = split_cuts(&arc, k, &positions) {
                    plan = ReshardPlan::Split { shard: id, cuts };
                }
            }
            let tier = tier_of[&id];
            match plan {
                ReshardPlan::Keep => units.push(Unit {
                    id,
                    primary,
                    load: arc.prediction,
                    records: s.record_count,
                    tier,
                    pinned: true,
                }),
                ReshardPlan::Merge { into, .. } => {
                    claimed.insert(into);
                    let sib = sibling.expect("merge needs a sibling");
                    let merged = histories[&into].merged(&histories[&id]);
                    histories.remove(&id);
                    histories.insert(into, merged);
                    positions.remove(&end);
                    units.push(Unit {
                        id: into,
                        primary,
                        load: arc.prediction + sib.prediction,
                        records: s.record_count + sib.records,
                        tier: tier.max(tier_of[&into]),
                        pinned: true,
                    });
                    report.merges += 1;
                    report.plan.ops.push(MigrationOp::Merge { shard: id, into });
                }
                ReshardPlan::Split { cuts, .. } => {
                    // Pieces in ring order; the parent keeps the last one.
                    let mut bounds = vec![start];
                    bounds.extend(&cuts);
                    bounds.push(end);
                    let mut piece_hits = vec![0.0; cuts.len() + 1];
                    let mut piece_records = vec![0usize; cuts.len() + 1];
                    for &k in &members[id.index()] {
                        let h = state.key_hash(k);
                        let j = (0..=cuts.len())
                            .find(|&j| {
                                Ownership::Arc {
                                    start: bounds[j],
                                    end: bounds[j + 1],
                                }
                                .contains(k, h)
                            })
                            .expect("pieces cover the arc");
                        piece_hits[j] += hits[k as usize] as f64;
                        piece_records[j] += 1;
                    }
                    let total_hits: f64 = piece_hits.iter().sum();
                    let parent_history = histories.remove(&id).expect("live shard has history");
                    for j in 0..=cuts.len() {
                        let share = if total_hits > 0.0 {
                            piece_hits[j] / total_hits
                        } else {
                            let len = bounds[j + 1].wrapping_sub(bounds[j]) as f64;
                            len / arc.len() as f64
                        };
                        let piece = if j < cuts.len() {
                            let c = ShardId(next_id);
                            next_id += 1;
                            positions.insert(cuts[j], c);
                            c
                        } else {
                            id
                        };
                        histories.insert(piece, parent_history.scaled(share));
                        units.push(Unit {
                            id: piece,
                            primary,
                            load: arc.prediction * share,
                            records: piece_records[j],
                            tier,
                            pinned: true,
                        });
                    }
                    report.splits += 1;
                    report.plan.ops.push(MigrationOp::Split {
                        shard: id,
                        primaries: vec![primary; cuts.len()],
                        cuts,
                    });
                }
            }
        }

        let mut node_load = vec![0.0; state.nodes.len()];
        for u in &units {
            node_load[u.primary.index()] += u.load;
        }

        // Promote a replica when the primary is down and the replica holds
        // every key intact.
        for u in units.iter_mut() {
            if state.node(u.primary).is_up() || u.id.index() >= state.shards.len() {
                continue;
            }
            let shard = &state.shards[u.id.index()];
            let keys = &members[u.id.index()];
            let target = shard
                .copies
                .replicas
                .iter()
                .map(|r| r.node)
                .filter(|&n| keys.iter().all(|&k| state.intact_on(n, k)))
                .min_by(|a, b| node_load[a.index()].total_cmp(&node_load[b.index()]).then(a.cmp(b)));
            if let Some(to) = target {
                node_load[u.primary.index()] -= u.load;
                node_load[to.index()] += u.load;
                u.primary = to;
                report.promotions += 1;
                report.plan.ops.push(MigrationOp::Move { shard: u.id, to });
            }
        }

        // Shed the densest shards off nodes predicted above the split
        // threshold or well above the cluster mean.
        let up = state.nodes.iter().filter(|n| n.is_up()).count().max(1) as f64;
        let mean = state.nodes.iter().filter(|n| n.is_up()).map(|n| node_load[n.id.index()]).sum::<f64>() / up;
        for n in &state.nodes {
            let limit = (self.forecast.split_threshold * n.capacity).min((1.0 + self.forecast.balance_slack) * mean);
            if !n.is_up() || node_load[n.id.index()] <= limit {
                continue;
            }
            let mut mine: Vec<usize> = (0..units.len()).filter(|&i| units[i].primary == n.id).collect();
            mine.sort_by(|&a, &b| units[b].load.total_cmp(&units[a].load).then(units[a].id.cmp(&units[b].id)));
            let mut rest: Vec<usize> = mine.into_iter().skip(1).collect();
            let density = |u: &Unit| u.load / u.records.max(1) as f64;
            rest.sort_by(|&a, &b| {
                density(&units[b])
                    .total_cmp(&density(&units[a]))
                    .then(units[a].id.cmp(&units[b].id))
            });
            let mut excess = node_load[n.id.index()] - limit;
            for i in rest {
                if excess <= 0.0 {
                    break;
                }
                if units[i].load <= 0.0 {
                    continue;
                }
                excess -= units[i].load;
                node_load[n.id.index()] -= units[i].load;
                units[i].pinned = false;
            }
        }

        let free: Vec<&Unit> = units.iter().filter(|u| !u.pinned).collect();
        if !free.is_empty() {
            let mut held = state.held_counts();
            for u in &free {
                held[u.primary.index()] = held[u.primary.index()].saturating_sub(u.records);
            }
            let slots: Vec<NodeSlot> = state
                .nodes
                .iter()
                .map(|n| NodeSlot {
                    node: n.id,
                    up: n.is_up(),
                    capacity: n.capacity,
                    assigned_load: node_load[n.id.index()],
                    records: held[n.id.index()],
                    storage_limit: n.storage_limit,
                })
                .collect();
            let demands: Vec<ShardDemand> = free
                .iter()
                .map(|u| ShardDemand {
                    shard: u.id,
                    tier: u.tier,
                    load: u.load,
                    records: u.records,
                })
                .collect();
            let current: BTreeMap<ShardId, NodeId> = free.iter().map(|u| (u.id, u.primary)).collect();
            for (shard, to) in temporal_assign(&demands, &slots)? {
                if current[&shard] != to {
                    report.moves += 1;
                    report.plan.ops.push(MigrationOp::Move { shard, to });
                }
            }
        }

        self.pending = Some(histories);
        Ok(report)
    }

    /// Brings every live shard back to the policy's copy count. Returns the
    /// plan and the shards whose placement had to be degraded.
    pub fn replica_plan(&self, state: &ClusterState, now: SimTime) -> Result<(MigrationPlan, Vec<ShardId>)> {
        let mut views = state.node_views();
        let mut plan = MigrationPlan::default();
        let mut degraded = Vec::new();
        for s in state.live_shards() {
            let p = place_replicas(s.id, s.primary(), &s.copies.replicas, &self.policy, &views, now)?;
            if p.degraded {
                degraded.push(s.id);
            }
            if p.set.replicas != s.copies.replicas {
                for r in &s.copies.replicas {
                    views[r.node.index()].load = views[r.node.index()].load.saturating_sub(s.record_count);
                }
                for r in &p.set.replicas {
                    views[r.node.index()].load += s.record_count;
                }
                plan.ops.push(MigrationOp::SetReplicas {
                    shard: s.id,
                    replicas: p.set.replicas,
                });
            }
        }
        Ok((plan, degraded))
    }
}
