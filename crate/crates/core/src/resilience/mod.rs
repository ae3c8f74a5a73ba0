//! Self-replication and self-repair: replica placement with node or region
//! anti-affinity, periodic synchronisation, read fail-over, and recursive
//! regeneration of damaged key arcs from surviving copies.

mod placement;
mod regen;

use serde::{Deserialize, Serialize};

pub use placement::{failover, place_replicas, sync_tick, NodeView, Placement, Replica, ReplicaSet};
pub use regen::{regenerate, DyadicArc, RegenPlan, RegenStep, RegenTask, TaskSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntiAffinity {
    /// Copies on distinct nodes.
    Node,
    /// Copies on distinct nodes, preferring distinct regions.
    Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplicationPolicy {
    /// Total copies per shard, primary included.
    pub rf: u32,
    /// Seconds between synchronisation rounds.
    pub sync_interval: f64,
    pub anti_affinity: AntiAffinity,
    /// Records per second a regeneration step copies. Unset means ten times
    /// the node's request capacity.
    pub repair_rate: Option<f64>,
    /// Divisor applied to the summed duration of serialised repair steps.
    pub repair_parallelism: f64,
}

impl Default for ReplicationPolicy {
    fn default() -> Self {
        ReplicationPolicy {
            rf: 2,
            sync_interval: 30.0,
            anti_affinity: AntiAffinity::Region,
            repair_rate: None,
            repair_parallelism: 2.0,
        }
    }
}
