use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::KeyHasher;
use crate::error::{Error, Result};
use crate::ids::NodeId;

/// Size of the circular hash space, `2^64`.
pub const RING_SPAN: u128 = 1u128 << 64;

/// Consistent-hash ring. A position `p` owns the arc `(predecessor, p]`;
/// lookups take the first position at or after the key hash, wrapping to
/// the smallest position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashRing {
    vnodes: u32,
    hasher: KeyHasher,
    positions: BTreeMap<u64, NodeId>,
}

impl HashRing {
    pub fn new(vnodes: u32, hasher: KeyHasher) -> Self {
        HashRing {
            vnodes: vnodes.max(1),
            hasher,
            positions: BTreeMap::new(),
        }
    }

    /// A ring holding `nodes` with `vnodes` positions each.
    pub fn with_nodes(nodes: impl IntoIterator<Item = NodeId>, vnodes: u32, hasher: KeyHasher) -> Self {
        let mut ring = HashRing::new(vnodes, hasher);
        for n in nodes {
            // Callers pass distinct ids.
            let _ = ring_add(&mut ring, n);
        }
        ring
    }

    pub fn vnodes(&self) -> u32 {
        self.vnodes
    }

    pub fn hasher(&self) -> &KeyHasher {
        &self.hasher
    }

    pub fn hash_function(&self) -> String {
        self.hasher.identifier()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.positions.values().any(|&n| n == node)
    }

    /// Positions in ring order.
    pub fn positions(&self) -> impl Iterator<Item = (u64, NodeId)> + '_ {
        self.positions.iter().map(|(&p, &n)| (p, n))
    }

    /// Owner of the first position `>= hash`, wrapping around.
    pub fn owner_of_hash(&self, hash: u64) -> Result<NodeId> {
        self.positions
            .range(hash..)
            .next()
            .or_else(|| self.positions.iter().next())
            .map(|(_, &n)| n)
            .ok_or(Error::EmptyRing)
    }

    /// Takes `pos` for `node` unless a lower node id already holds it.
    fn claim(&mut self, pos: u64, node: NodeId) {
        match self.positions.get(&pos) {
            Some(&owner) if owner < node => {}
            _ => {
                self.positions.insert(pos, node);
            }
        }
    }

    /// Fraction of the hash space each node owns.
    pub fn ownership(&self) -> BTreeMap<NodeId, f64> {
        let mut share: BTreeMap<NodeId, u128> = BTreeMap::new();
        let mut prev = self.positions.keys().next_back().copied();
        for (&p, &n) in &self.positions {
            let len = arc_len(prev.unwrap_or(p), p, self.positions.len());
            *share.entry(n).or_default() += len;
            prev = Some(p);
        }
        share
            .into_iter()
            .map(|(n, l)| (n, l as f64 / RING_SPAN as f64))
            .collect()
    }
}

/// Length of the arc `(start, end]`; a ring with one position owns everything.
pub(crate) fn arc_len(start: u64, end: u64, ring_len: usize) -> u128 {
    if ring_len <= 1 || start == end {
        RING_SPAN
    } else {
        end.wrapping_sub(start) as u128
    }
}

/// Node responsible for `key`.
pub fn ring_locate(key: u64, ring: &HashRing) -> Result<NodeId> {
    ring.owner_of_hash(ring.hasher.hash_key(key))
}

/// Adds `node`'s virtual positions. Returns the fraction of the hash space
/// that changed owner, all of which now belongs to `node`. A position
/// already taken goes to the lower node id.
pub fn ring_add(ring: &mut HashRing, node: NodeId) -> Result<f64> {
    if ring.contains_node(node) {
        return Err(Error::DuplicateNode(node));
    }
    let before = ring.ownership();
    for v in 0..ring.vnodes {
        let pos = ring.hasher.hash_vnode(node, v);
        ring.claim(pos, node);
    }
    let after = ring.ownership();
    let gained = after.get(&node).copied().unwrap_or(0.0);
    debug_assert!(!before.contains_key(&node));
    Ok(gained)
}

/// Removes every position of `node`. Returns the fraction of the hash space
/// it owned.
pub fn ring_remove(ring: &mut HashRing, node: NodeId) -> Result<f64> {
    if !ring.contains_node(node) {
        return Ok(0.0);
    }
    let owned = ring.ownership().get(&node).copied().unwrap_or(0.0);
    ring.positions.retain(|_, n| *n != node);
    Ok(owned)
}
