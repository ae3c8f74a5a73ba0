//! Holt forecasts of shard load drive splits and merges on the ring.
//!
//!     cargo run --example forecast_reshard

use std::collections::BTreeMap;

use shardsim::adaptive::{forecast, plan_reshard, ArcShard, ForecastConfig, LoadHistory};
use shardsim::ShardId;

fn main() -> shardsim::Result<()> {
    let cfg = ForecastConfig::default();
    let capacity = 100.0;
    let quarter = u64::MAX / 4;
    let ring: BTreeMap<u64, ShardId> = (1..=4).map(|i| (quarter * i, ShardId(i as u32 - 1))).collect();

    let histories = [
        ("rising", vec![20.0, 35.0, 50.0, 65.0, 80.0]),
        ("steady", vec![40.0, 42.0, 39.0, 41.0, 40.0]),
        ("fading", vec![30.0, 22.0, 15.0, 10.0, 8.0]),
        ("idle", vec![5.0, 4.0, 6.0, 5.0, 5.0]),
    ];
    let mut arcs = Vec::new();
    for (i, (name, values)) in histories.iter().enumerate() {
        let predicted = forecast(&LoadHistory::from_values(values), &cfg)?;
        println!("{name:<7} last {:>5.1} predicted {predicted:>6.1}", values.last().unwrap());
        arcs.push(ArcShard {
            shard: ShardId(i as u32),
            start: quarter * i as u64,
            end: quarter * (i as u64 + 1),
            records: 2500,
            prediction: predicted,
        });
    }
    for (i, arc) in arcs.iter().enumerate() {
        let next = arcs.get(i + 1);
        println!("{} -> {:?}", histories[i].0, plan_reshard(arc, capacity, &ring, &cfg, next));
    }
    Ok(())
}
