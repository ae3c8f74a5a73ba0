use serde::{Deserialize, Serialize};

use crate::cluster::RecordMeta;
use crate::error::{Error, Result};
use crate::ids::{NodeId, ShardId};
use crate::time::SimTime;

/// Sliding windows for heat classification, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub hot_window: f64,
    pub warm_window: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            hot_window: 3600.0,
            warm_window: 86_400.0,
        }
    }
}

/// Ordered `Cold < Warm < Hot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatTier {
    Cold,
    Warm,
    Hot,
}

/// Tier of a record last touched `age` ago. Windows are half-open: an age of
/// exactly `hot_window` is already warm.
pub fn classify_age(age: SimTime, cfg: &WindowConfig) -> HeatTier {
    if age < SimTime::from_secs_f64(cfg.hot_window) {
        HeatTier::Hot
    } else if age < SimTime::from_secs_f64(cfg.warm_window) {
        HeatTier::Warm
    } else {
        HeatTier::Cold
    }
}

pub fn classify_heat(meta: &RecordMeta, now: SimTime, cfg: &WindowConfig) -> HeatTier {
    classify_age(now.saturating_sub(meta.last_touch()), cfg)
}

/// A shard waiting for a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShardDemand {
    pub shard: ShardId,
    pub tier: HeatTier,
    /// Expected requests per second.
    pub load: f64,
    pub records: usize,
}

/// A candidate node and what it already carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSlot {
    pub node: NodeId,
    pub up: bool,
    pub capacity: f64,
    pub assigned_load: f64,
    pub records: usize,
    pub storage_limit: usize,
}

impl NodeSlot {
    fn headroom(&self) -> f64 {
        self.capacity - self.assigned_load
    }
}

/// Places shards hottest first, each on the live node with the most spare
/// capacity. Nodes without storage room are skipped while any node has room.
/// Ties go to the node holding fewer records, then the lower id.
pub fn temporal_assign(shards: &[ShardDemand], nodes: &[NodeSlot]) -> Result<Vec<(ShardId, NodeId)>> {
    let mut slots: Vec<NodeSlot> = nodes.iter().copied().filter(|n| n.up).collect();
    if slots.is_empty() {
        return Err(Error::NoLiveNodes);
    }
    let mut order: Vec<&ShardDemand> = shards.iter().collect();
    order.sort_by(|a, b| {
        b.tier
            .cmp(&a.tier)
            .then(b.load.total_cmp(&a.load))
            .then(a.shard.cmp(&b.shard))
    });
    let better = |a: &NodeSlot, b: &NodeSlot| {
        a.headroom()
            .total_cmp(&b.headroom())
            .then(b.records.cmp(&a.records))
            .then(b.node.cmp(&a.node))
    };
    let mut out = Vec::with_capacity(order.len());
    for s in order {
        let pick = |room_only: bool| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, n)| !room_only || n.records + s.records <= n.storage_limit)
                .max_by(|a, b| better(a.1, b.1))
                .map(|(i, _)| i)
        };
        let idx = pick(true).or_else(|| pick(false)).expect("at least one live node");
        let slot = &mut slots[idx];
        slot.assigned_load += s.load;
        slot.records += s.records;
        out.push((s.shard, slot.node));
    }
    Ok(out)
}
