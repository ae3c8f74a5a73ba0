use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::ids::{Key, NodeId};

// Domain separation between key hashes and virtual-node positions.
const VNODE_DOMAIN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seeded XXH3-64 over little-endian encodings; identical on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeyHasher {
    pub seed: u64,
}

impl KeyHasher {
    pub fn new(seed: u64) -> Self {
        KeyHasher { seed }
    }

    pub fn hash_key(&self, key: Key) -> u64 {
        xxh3_64_with_seed(&key.to_le_bytes(), self.seed)
    }

    pub fn hash_vnode(&self, node: NodeId, vnode: u32) -> u64 {
        let mut buf = [0u8; 8];
        buf[..4].copy_from_slice(&node.0.to_le_bytes());
        buf[4..].copy_from_slice(&vnode.to_le_bytes());
        xxh3_64_with_seed(&buf, self.seed ^ VNODE_DOMAIN)
    }

    /// Key hash mapped to `[0, 1)`.
    pub fn unit(&self, key: Key) -> f64 {
        (self.hash_key(key) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Identifier recorded in reports.
    pub fn identifier(&self) -> String {
        format!("xxh3-64(seed={})", self.seed)
    }
}

/// Hash-modulus sharding: `hash(key) mod n_shards`.
pub fn hash_locate(key: Key, n_shards: u32, hasher: &KeyHasher) -> u32 {
    assert!(n_shards >= 1, "n_shards must be >= 1");
    (hasher.hash_key(key) % n_shards as u64) as u32
}
