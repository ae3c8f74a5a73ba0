//! Recursive regeneration of damaged data.
//!
//! The key-hash space is a binary trie. Starting from the root, a task whose
//! damaged keys are all intact on a single source node is repaired with one
//! copy; otherwise it splits into its two halves and recurses. A task that is
//! down to one key with no intact copy anywhere is unrecoverable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{Key, NodeId};
use crate::time::SimTime;

/// The hashes sharing their top `depth` bits with `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicArc {
    pub start: u64,
    pub depth: u8,
}

impl DyadicArc {
    pub const FULL: DyadicArc = DyadicArc { start: 0, depth: 0 };

    pub fn contains(&self, hash: u64) -> bool {
        match self.depth {
            0 => true,
            d if d >= 64 => hash == self.start,
            d => (hash >> (64 - d)) == (self.start >> (64 - d)),
        }
    }

    /// Number of hashes covered.
    pub fn width(&self) -> u128 {
        1u128 << (64 - self.depth.min(64) as u32)
    }

    /// Left and right halves. Panics at full depth.
    pub fn halves(&self) -> (DyadicArc, DyadicArc) {
        assert!(self.depth < 64, "single-point arc cannot split");
        let depth = self.depth + 1;
        let bit = 1u64 << (64 - depth as u32);
        (
            DyadicArc {
                start: self.start,
                depth,
            },
            DyadicArc {
                start: self.start | bit,
                depth,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSource {
    /// Copied in one step from this node.
    Replica(NodeId),
    /// No single source covers the arc; its halves are separate tasks.
    Split,
    /// Some damaged key here has no intact copy anywhere.
    Unrecoverable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenTask {
    pub node: NodeId,
    pub arc: DyadicArc,
    pub depth: u8,
    pub source: TaskSource,
    /// Damaged keys inside the arc.
    pub damaged: usize,
}

/// One copy operation, executed by the event loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenStep {
    pub node: NodeId,
    pub arc: DyadicArc,
    pub source: NodeId,
    pub keys: Vec<Key>,
    pub duration: SimTime,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegenPlan {
    /// Every task of the recursion, parents before children, left before right.
    pub tasks: Vec<RegenTask>,
    /// Copy steps in execution order.
    pub steps: Vec<RegenStep>,
    pub unrecoverable: Vec<Key>,
}

impl RegenPlan {
    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn max_depth(&self) -> u8 {
        self.tasks.iter().map(|t| t.depth).max().unwrap_or(0)
    }

    /// Sum of step durations.
    pub fn total_duration(&self) -> SimTime {
        self.steps
            .iter()
            .fold(SimTime::ZERO, |acc, s| acc + s.duration)
    }

    pub fn restored_keys(&self) -> usize {
        self.steps.iter().map(|s| s.keys.len()).sum()
    }
}

/// Plans the repair of `node`.
///
/// `damaged` lists the node's damaged keys with their hashes. `sources` maps
/// each candidate source node to the keys it holds intact; ties between
/// covering sources go to the lowest node id. A step copying `n` records
/// takes `n / repair_rate` seconds.
pub fn regenerate(
    node: NodeId,
    damaged: &[(Key, u64)],
    sources: &BTreeMap<NodeId, BTreeSet<Key>>,
    repair_rate: f64,
) -> RegenPlan {
    let mut plan = RegenPlan::default();
    if damaged.is_empty() {
        return plan;
    }
    let mut keys: Vec<(Key, u64)> = damaged.to_vec();
    keys.sort_by_key(|&(k, h)| (h, k));
    keys.dedup();
    let ctx = Ctx {
        node,
        sources,
        repair_rate: repair_rate.max(f64::MIN_POSITIVE),
    };
    ctx.visit(DyadicArc::FULL, &keys, &mut plan);
    plan
}

struct Ctx<'a> {
    node: NodeId,
    sources: &'a BTreeMap<NodeId, BTreeSet<Key>>,
    repair_rate: f64,
}

impl Ctx<'_> {
    fn covering_source(&self, keys: &[(Key, u64)]) -> Option<NodeId> {
        self.sources
            .iter()
            .find(|(&n, intact)| n != self.node && keys.iter().all(|(k, _)| intact.contains(k)))
            .map(|(&n, _)| n)
    }

    fn visit(&self, arc: DyadicArc, keys: &[(Key, u64)], plan: &mut RegenPlan) {
        if keys.is_empty() {
            return;
        }
        let task = |source| RegenTask {
            node: self.node,
            arc,
            depth: arc.depth,
            source,
            damaged: keys.len(),
        };
        if let Some(src) = self.covering_source(keys) {
            plan.tasks.push(task(TaskSource::Replica(src)));
            plan.steps.push(RegenStep {
                node: self.node,
                arc,
                source: src,
                keys: keys.iter().map(|&(k, _)| k).collect(),
                duration: SimTime::from_secs_f64(keys.len() as f64 / self.repair_rate),
            });
            return;
        }
        // Per-record base case: one key (or indistinguishable hashes) left.
        if keys.len() == 1 || arc.depth >= 64 || keys.first().map(|k| k.1) == keys.last().map(|k| k.1) {
            plan.tasks.push(task(TaskSource::Unrecoverable));
            plan.unrecoverable.extend(keys.iter().map(|&(k, _)| k));
            return;
        }
        plan.tasks.push(task(TaskSource::Split));
        let (left, right) = arc.halves();
        let cut = keys.partition_point(|&(_, h)| left.contains(h));
        self.visit(left, &keys[..cut], plan);
        self.visit(right, &keys[cut..], plan);
    }
}
