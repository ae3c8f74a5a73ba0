//! Baseline partitioning: static key ranges, hash-modulus classes, and a
//! consistent-hash ring with virtual nodes. The adaptive strategy reuses the
//! ring as its substrate.

mod hashing;
mod range;
mod ring;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hashing::{hash_locate, KeyHasher};
pub use range::{range_locate, RangeTable};
pub use ring::{ring_add, ring_locate, ring_remove, HashRing, RING_SPAN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Range,
    Hash,
    Consistent,
    Adaptive,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Range,
        StrategyKind::Hash,
        StrategyKind::Consistent,
        StrategyKind::Adaptive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Range => "range",
            StrategyKind::Hash => "hash",
            StrategyKind::Consistent => "consistent",
            StrategyKind::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "range" => Ok(StrategyKind::Range),
            "hash" => Ok(StrategyKind::Hash),
            "consistent" => Ok(StrategyKind::Consistent),
            "adaptive" | "our" => Ok(StrategyKind::Adaptive),
            other => Err(format!(
                "unknown strategy `{other}` (expected range, hash, consistent or adaptive)"
            )),
        }
    }
}
