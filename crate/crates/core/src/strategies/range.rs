use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{Key, ShardId};

/// Sorted `(upper_bound_exclusive, shard)` pairs covering `[0, key_count)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeTable {
    bounds: Vec<(Key, ShardId)>,
}

impl RangeTable {
    pub fn new(bounds: Vec<(Key, ShardId)>, key_count: Key) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::schema("range_table", "must have at least one range"));
        }
        if bounds.windows(2).any(|w| w[0].0 >= w[1].0) || bounds[0].0 == 0 {
            return Err(Error::schema("range_table", "bounds must be strictly increasing"));
        }
        if bounds.last().map(|b| b.0) != Some(key_count) {
            return Err(Error::schema("range_table", "last bound must equal key_count"));
        }
        Ok(RangeTable { bounds })
    }

    /// `n_shards` equal-width ranges; shard `i` covers the `i`-th range.
    pub fn equal_width(key_count: Key, n_shards: u32) -> Self {
        assert!(key_count >= 1);
        let n = (n_shards.max(1) as u64).min(key_count);
        let bounds = (0..n)
            .map(|i| (((i + 1) * key_count) / n, ShardId(i as u32)))
            .collect();
        RangeTable { bounds }
    }

    pub fn bounds(&self) -> &[(Key, ShardId)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Inclusive lower bound of range `i`.
    pub fn lower(&self, i: usize) -> Key {
        if i == 0 {
            0
        } else {
            self.bounds[i - 1].0
        }
    }
}

/// Shard of the first range whose exclusive upper bound exceeds `key`.
pub fn range_locate(key: Key, table: &RangeTable) -> ShardId {
    let i = table.bounds.partition_point(|&(upper, _)| upper <= key);
    table.bounds[i.min(table.bounds.len() - 1)].1
}
