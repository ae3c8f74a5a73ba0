use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ForecastConfig;
use crate::ids::ShardId;
use crate::strategies::RING_SPAN;

/// A shard owning the ring arc `(start, end]`, with its predicted load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcShard {
    pub shard: ShardId,
    pub start: u64,
    pub end: u64,
    pub records: usize,
    /// Predicted requests per second.
    pub prediction: f64,
}

impl ArcShard {
    pub fn len(&self) -> u128 {
        if self.start == self.end {
            RING_SPAN
        } else {
            self.end.wrapping_sub(self.start) as u128
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReshardPlan {
    Keep,
    /// New ring positions inside the arc, in ring order from its start. Each
    /// cut ends a child arc; the parent keeps the last piece.
    Split { shard: ShardId, cuts: Vec<u64> },
    /// Fold the arc into its clockwise neighbour.
    Merge { shard: ShardId, into: ShardId },
}

/// `k - 1` cut points dividing `(start, end]` into `k` arcs of equal length.
/// `None` if the arc is too short or a cut would land on an existing position.
pub fn split_cuts(arc: &ArcShard, k: usize, ring: &BTreeMap<u64, ShardId>) -> Option<Vec<u64>> {
    if k < 2 {
        return None;
    }
    let len = arc.len();
    if len < k as u128 {
        return None;
    }
    let cuts: Vec<u64> = (1..k as u128)
        .map(|i| arc.start.wrapping_add((len * i / k as u128) as u64))
        .collect();
    let clash = cuts
        .iter()
        .any(|c| *c == arc.start || *c == arc.end || ring.contains_key(c));
    (!clash).then_some(cuts)
}

/// Decides whether a shard should split, merge, or stay.
///
/// Above `split_threshold · capacity` the arc splits into
/// `ceil(prediction / (split_threshold · capacity))` equal pieces, so that
/// each piece's share of the prediction, taken proportional to its arc
/// length, fits under the threshold. Below `merge_threshold · capacity` it
/// merges into `sibling` when the two together stay under the split
/// threshold. Single-record shards never split.
pub fn plan_reshard(
    shard: &ArcShard,
    capacity: f64,
    ring: &BTreeMap<u64, ShardId>,
    cfg: &ForecastConfig,
    sibling: Option<&ArcShard>,
) -> ReshardPlan {
    let split_at = cfg.split_threshold * capacity;
    if shard.prediction > split_at && shard.records >= 2 {
        let k = (shard.prediction / split_at).ceil().max(2.0) as usize;
        if let Some(cuts) = split_cuts(shard, k, ring) {
            return ReshardPlan::Split {
                shard: shard.shard,
                cuts,
            };
        }
        return ReshardPlan::Keep;
    }
    if shard.prediction < cfg.merge_threshold * capacity {
        if let Some(s) = sibling {
            if s.shard != shard.shard && shard.prediction + s.prediction <= split_at {
                return ReshardPlan::Merge {
                    shard: shard.shard,
                    into: s.shard,
                };
            }
        }
    }
    ReshardPlan::Keep
}
