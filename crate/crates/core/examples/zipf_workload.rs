//! The four workload shapes: arrival rates over time and key popularity.
//!
//!     cargo run --example zipf_workload

use shardsim::rng::rng_stream;
use shardsim::workload::{generate_requests, Pattern, PatternShift, WorkloadSpec};
use shardsim::SimTime;

fn main() {
    let duration = SimTime::from_secs(1200);
    let shapes = [
        ("uniform", Pattern::Uniform),
        ("skewed", Pattern::Skewed),
        ("periodic", Pattern::Periodic { period: 600.0, amplitude: 0.5 }),
        ("seasonal", Pattern::Seasonal { period: 2400.0, amplitude: 0.5 }),
    ];
    for (name, pattern) in shapes {
        let spec = WorkloadSpec {
            key_count: 10_000,
            base_rate: Some(100.0),
            pattern,
            shifts: vec![PatternShift {
                at: 600.0,
                hot_offset: Some(5000),
                ..PatternShift::default()
            }],
            ..WorkloadSpec::default()
        };
        let reqs = generate_requests(&spec, duration, &mut rng_stream(1, "workload"));
        let mut per_window = [0usize; 6];
        for r in &reqs {
            per_window[(r.arrival.as_secs_f64() / 200.0) as usize] += 1;
        }
        let top = |lo: f64, hi: f64| {
            let mut counts = std::collections::BTreeMap::new();
            for r in reqs.iter().filter(|r| (lo..hi).contains(&r.arrival.as_secs_f64())) {
                *counts.entry(r.key).or_insert(0) += 1;
            }
            counts.into_iter().max_by_key(|&(k, c)| (c, std::cmp::Reverse(k))).map(|(k, _)| k)
        };
        let rates: Vec<String> = per_window.iter().map(|c| format!("{:.0}", *c as f64 / 200.0)).collect();
        println!(
            "{name:<9} {} requests, rate per 200 s window [{}], hottest key {:?} then {:?}",
            reqs.len(),
            rates.join(" "),
            top(0.0, 600.0),
            top(600.0, 1200.0)
        );
    }
}
