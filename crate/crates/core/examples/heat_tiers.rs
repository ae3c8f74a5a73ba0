//! Classify records by last touch and place shards hottest first.
//!
//!     cargo run --example heat_tiers

use shardsim::adaptive::{classify_heat, temporal_assign, HeatTier, NodeSlot, ShardDemand, WindowConfig};
use shardsim::cluster::RecordMeta;
use shardsim::{NodeId, ShardId, SimTime};

fn main() -> shardsim::Result<()> {
    let windows = WindowConfig::default();
    let now = SimTime::from_secs(200_000);
    for age in [60, 1800, 3600, 40_000, 86_400, 172_800] {
        let mut meta = RecordMeta::new(0, SimTime::ZERO);
        meta.last_access = now.saturating_sub(SimTime::from_secs(age));
        println!("last touched {age:>6} s ago -> {:?}", classify_heat(&meta, now, &windows));
    }

    let demand = [
        (0, HeatTier::Cold, 2.0, 900),
        (1, HeatTier::Hot, 60.0, 200),
        (2, HeatTier::Warm, 15.0, 400),
        (3, HeatTier::Hot, 45.0, 150),
        (4, HeatTier::Warm, 20.0, 300),
        (5, HeatTier::Cold, 1.0, 1200),
    ]
    .map(|(id, tier, load, records)| ShardDemand {
        shard: ShardId(id),
        tier,
        load,
        records,
    });
    let nodes = [(0, 100.0), (1, 60.0), (2, 60.0)].map(|(id, capacity)| NodeSlot {
        node: NodeId(id),
        up: true,
        capacity,
        assigned_load: 0.0,
        records: 0,
        storage_limit: 2000,
    });
    for (shard, node) in temporal_assign(&demand, &nodes)? {
        let d = demand.iter().find(|d| d.shard == shard).expect("placed shard exists");
        println!("{shard} ({:?}, {:.0} req/s) -> {node}", d.tier, d.load);
    }
    Ok(())
}
