use serde::{Deserialize, Serialize};

use super::{AntiAffinity, ReplicationPolicy};
use crate::error::{Error, Result};
use crate::ids::{NodeId, RegionId, ShardId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    pub node: NodeId,
    /// Last instant this copy was brought in line with the primary.
    pub synced_at: SimTime,
}

impl Replica {
    pub fn staleness(&self, now: SimTime) -> SimTime {
        now.saturating_sub(self.synced_at)
    }
}

/// Where the copies of one shard live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSet {
    pub shard: ShardId,
    pub primary: NodeId,
    pub replicas: Vec<Replica>,
}

impl ReplicaSet {
    pub fn primary_only(shard: ShardId, primary: NodeId) -> Self {
        ReplicaSet {
            shard,
            primary,
            replicas: Vec::new(),
        }
    }

    /// Primary first, then replicas in placement order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.primary).chain(self.replicas.iter().map(|r| r.node))
    }

    pub fn holds(&self, node: NodeId) -> bool {
        self.primary == node || self.replicas.iter().any(|r| r.node == node)
    }

    pub fn copies(&self) -> usize {
        1 + self.replicas.len()
    }
}

/// What placement needs to know about a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeView {
    pub id: NodeId,
    pub region: RegionId,
    pub up: bool,
    /// Records currently held; placement prefers lightly loaded nodes.
    pub load: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub set: ReplicaSet,
    /// The policy's copy count or anti-affinity could not be met.
    pub degraded: bool,
}

/// Fills `primary`'s shard up to `policy.rf` copies. Replicas in `existing`
/// that are still valid are kept with their sync state; new replicas go to
/// the least-loaded eligible node and start fresh at `now`.
pub fn place_replicas(
    shard: ShardId,
    primary: NodeId,
    existing: &[Replica],
    policy: &ReplicationPolicy,
    nodes: &[NodeView],
    now: SimTime,
) -> Result<Placement> {
    if !nodes.iter().any(|n| n.up) {
        return Err(Error::NoLiveNodes);
    }
    let view = |id: NodeId| nodes.iter().find(|n| n.id == id);
    let wanted = policy.rf.saturating_sub(1) as usize;
    let by_region = policy.anti_affinity == AntiAffinity::Region;

    let mut used_regions: Vec<RegionId> = view(primary).map(|n| n.region).into_iter().collect();
    let mut chosen: Vec<Replica> = Vec::with_capacity(wanted);

    for r in existing {
        if chosen.len() == wanted {
            break;
        }
        let Some(n) = view(r.node) else { continue };
        let duplicate = r.node == primary || chosen.iter().any(|c| c.node == r.node);
        if !n.up || duplicate || (by_region && used_regions.contains(&n.region)) {
            continue;
        }
        used_regions.push(n.region);
        chosen.push(*r);
    }

    let mut degraded = false;
    while chosen.len() < wanted {
        let free = nodes
            .iter()
            .filter(|n| n.up && n.id != primary && !chosen.iter().any(|c| c.node == n.id));
        let pick_key = |n: &&NodeView| (n.load, n.id);
        let pick = if by_region {
            let spread = free
                .clone()
                .filter(|n| !used_regions.contains(&n.region))
                .min_by_key(pick_key);
            if spread.is_none() {
                degraded = true;
            }
            spread.or_else(|| free.min_by_key(pick_key))
        } else {
            free.min_by_key(pick_key)
        };
        match pick {
            Some(n) => {
                used_regions.push(n.region);
                chosen.push(Replica {
                    node: n.id,
                    synced_at: now,
                });
            }
            None => {
                degraded = true;
                break;
            }
        }
    }

    Ok(Placement {
        set: ReplicaSet {
            shard,
            primary,
            replicas: chosen,
        },
        degraded,
    })
}

/// A synchronisation round: replicas on live nodes catch up with the primary,
/// replicas on failed nodes keep ageing.
pub fn sync_tick(set: &mut ReplicaSet, now: SimTime, is_up: impl Fn(NodeId) -> bool) {
    for r in &mut set.replicas {
        if is_up(r.node) {
            r.synced_at = now;
        }
    }
}

/// Replica that should serve a read the primary cannot: the least stale live
/// replica holding the key intact. `None` means the read is unavailable.
pub fn failover(
    set: &ReplicaSet,
    now: SimTime,
    can_serve: impl Fn(NodeId) -> bool,
) -> Option<NodeId> {
    set.replicas
        .iter()
        .filter(|r| can_serve(r.node))
        .min_by_key(|r| (r.staleness(now), r.node))
        .map(|r| r.node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(regions: &[u32]) -> Vec<NodeView> {
        regions
            .iter()
            .enumerate()
            .map(|(i, &r)| NodeView {
                id: NodeId(i as u32),
                region: RegionId(r),
                up: true,
                load: 0,
            })
            .collect()
    }

    fn policy(rf: u32, aa: AntiAffinity) -> ReplicationPolicy {
        ReplicationPolicy {
            rf,
            anti_affinity: aa,
            ..Default::default()
        }
    }

    #[test]
    fn replica_lands_in_other_region() {
        let ns = nodes(&[0, 1, 0, 1]);
        let p = place_replicas(ShardId(0), NodeId(0), &[], &policy(2, AntiAffinity::Region), &ns, SimTime::ZERO)
            .unwrap();
        assert!(!p.degraded);
        assert_eq!(p.set.replicas.len(), 1);
        assert_eq!(ns[p.set.replicas[0].node.index()].region, RegionId(1));
    }

    #[test]
    fn single_node_cluster_degrades() {
        let p = place_replicas(ShardId(0), NodeId(0), &[], &policy(2, AntiAffinity::Region), &nodes(&[0]), SimTime::ZERO)
            .unwrap();
        assert!(p.degraded);
        assert_eq!(p.set.copies(), 1);
    }

    #[test]
    fn rf_one_means_primary_only() {
        let p = place_replicas(ShardId(0), NodeId(1), &[], &policy(1, AntiAffinity::Node), &nodes(&[0, 1, 2]), SimTime::ZERO)
            .unwrap();
        assert!(!p.degraded);
        assert!(p.set.replicas.is_empty());
    }

    #[test]
    fn no_live_nodes_is_an_error() {
        let mut ns = nodes(&[0, 1]);
        ns.iter_mut().for_each(|n| n.up = false);
        assert_eq!(
            place_replicas(ShardId(0), NodeId(0), &[], &policy(2, AntiAffinity::Node), &ns, SimTime::ZERO),
            Err(Error::NoLiveNodes)
        );
    }

    #[test]
    fn same_region_fallback_is_flagged() {
        let ns = nodes(&[0, 0, 0]);
        let p = place_replicas(ShardId(0), NodeId(0), &[], &policy(2, AntiAffinity::Region), &ns, SimTime::ZERO)
            .unwrap();
        assert!(p.degraded);
        assert_eq!(p.set.copies(), 2);
    }

    #[test]
    fn valid_existing_replicas_are_kept() {
        let ns = nodes(&[0, 1, 1]);
        let existing = [Replica {
            node: NodeId(2),
            synced_at: SimTime::from_secs(7),
        }];
        let p = place_replicas(ShardId(0), NodeId(0), &existing, &policy(2, AntiAffinity::Region), &ns, SimTime::from_secs(9))
            .unwrap();
        assert_eq!(p.set.replicas, existing.to_vec());
    }

    #[test]
    fn failed_replica_is_replaced() {
        let mut ns = nodes(&[0, 1, 1]);
        ns[2].up = false;
        let existing = [Replica {
            node: NodeId(2),
            synced_at: SimTime::ZERO,
        }];
        let p = place_replicas(ShardId(0), NodeId(0), &existing, &policy(2, AntiAffinity::Region), &ns, SimTime::from_secs(9))
            .unwrap();
        assert_eq!(p.set.replicas[0].node, NodeId(1));
        assert_eq!(p.set.replicas[0].synced_at, SimTime::from_secs(9));
    }

    #[test]
    fn prefers_least_loaded() {
        let mut ns = nodes(&[0, 1, 1]);
        ns[1].load = 10;
        let p = place_replicas(ShardId(0), NodeId(0), &[], &policy(2, AntiAffinity::Region), &ns, SimTime::ZERO)
            .unwrap();
        assert_eq!(p.set.replicas[0].node, NodeId(2));
    }

    fn set(replicas: &[(u32, u64)]) -> ReplicaSet {
        ReplicaSet {
            shard: ShardId(0),
            primary: NodeId(0),
            replicas: replicas
                .iter()
                .map(|&(n, t)| Replica {
                    node: NodeId(n),
                    synced_at: SimTime::from_secs(t),
                })
                .collect(),
        }
    }

    #[test]
    fn sync_with_everyone_up_resets_staleness() {
        let mut s = set(&[(1, 0), (2, 0)]);
        let now = SimTime::from_secs(30);
        sync_tick(&mut s, now, |_| true);
        assert!(s.replicas.iter().all(|r| r.staleness(now) == SimTime::ZERO));
    }

    #[test]
    fn failed_replica_accumulates_staleness() {
        let interval = SimTime::from_secs(30);
        let mut s = set(&[(1, 0), (2, 0)]);
        let mut now = SimTime::ZERO;
        for _ in 0..3 {
            now += interval;
            sync_tick(&mut s, now, |n| n != NodeId(2));
        }
        assert_eq!(s.replicas[1].staleness(now), SimTime::from_secs(90));
        assert_eq!(s.replicas[0].staleness(now), SimTime::ZERO);
    }

    #[test]
    fn sync_on_primary_only_set_is_noop() {
        let mut s = set(&[]);
        let before = s.clone();
        sync_tick(&mut s, SimTime::from_secs(5), |_| true);
        assert_eq!(s, before);
    }

    #[test]
    fn failover_to_single_replica() {
        let s = set(&[(1, 0)]);
        assert_eq!(failover(&s, SimTime::from_secs(1), |_| true), Some(NodeId(1)));
    }

    #[test]
    fn failover_with_everything_down() {
        let s = set(&[(1, 0), (2, 0)]);
        assert_eq!(failover(&s, SimTime::from_secs(1), |_| false), None);
    }

    #[test]
    fn failover_prefers_least_stale() {
        let now = SimTime::from_secs(100);
        // staleness 50 for node 1, 5 for node 2
        let s = set(&[(1, 50), (2, 95)]);
        assert_eq!(failover(&s, now, |_| true), Some(NodeId(2)));
    }
}
