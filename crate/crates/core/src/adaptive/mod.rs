//! The adaptive strategy: sliding-window heat tiers, fractal-dimension shard
//! sizing, and forecast-driven splitting, merging and shedding of ring arcs.

mod controller;
mod forecast;
mod fractal;
mod heat;
mod reshard;

pub use controller::{Controller, TickReport};
pub use forecast::{forecast, ForecastConfig, LoadHistory};
pub use fractal::{dyadic_scales, fractal_dimension, target_shard_size, FractalEstimate};
pub use heat::{classify_age, classify_heat, temporal_assign, HeatTier, NodeSlot, ShardDemand, WindowConfig};
pub use reshard::{plan_reshard, split_cuts, ArcShard, ReshardPlan};
