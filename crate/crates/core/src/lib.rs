//! Deterministic discrete-event simulation of a sharded key-value store.
//!
//! Four partitioning strategies run against the same seeded workload and
//! failure schedule: static key ranges, hash-modulus classes, a
//! consistent-hash ring, and an adaptive scheme that classifies shards by
//! recency, sizes them by the fractal dimension of their keys, forecasts
//! their load to split, merge and shed ring arcs ahead of overload,
//! replicates them across regions and regenerates corrupted arcs from
//! surviving copies.
//!
//! ```no_run
//! use shardsim::{config::parse_config, report::cmd_compare, strategies::StrategyKind};
//!
//! let cfg = parse_config("examples/scenarios/skewed.toml")?;
//! let report = cmd_compare(&cfg, &StrategyKind::ALL, &[1, 2, 3])?;
//! print!("{}", report.table().unwrap());
//! # Ok::<(), shardsim::Error>(())
//! ```

pub mod adaptive;
pub mod cluster;
pub mod config;
pub mod error;
pub mod event;
pub mod ids;
pub mod metrics;
pub mod report;
pub mod resilience;
pub mod rng;
pub mod sim;
pub mod strategies;
pub mod time;
pub mod workload;

pub use error::{Error, Result};
pub use ids::{Key, NodeId, RegionId, ShardId};
pub use time::SimTime;
