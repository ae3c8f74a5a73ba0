//! One simulation from a scenario file, summarised per bucket.
//!
//!     cargo run --example single_run -- examples/scenarios/skewed.toml adaptive 7

use std::path::PathBuf;

use shardsim::config::parse_config;
use shardsim::report::cmd_run;
use shardsim::strategies::StrategyKind;

fn main() -> shardsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let path: PathBuf = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| [env!("CARGO_MANIFEST_DIR"), "examples", "scenarios", "skewed.toml"].iter().collect());
    let mut cfg = parse_config(&path)?;
    if let Some(s) = args.next() {
        cfg.strategy = s.parse::<StrategyKind>().map_err(|e| shardsim::Error::Io(e.to_string()))?;
    }
    let seed = args.next().and_then(|s| s.parse().ok()).or(Some(7));

    let report = cmd_run(&cfg, seed)?;
    let run = &report.runs[0];
    println!(
        "{} seed {}: {}/{} served, throughput {:.1}/s",
        run.strategy, run.seed, run.requests_ok, run.requests, run.throughput
    );
    println!(
        "performance {:.3}, fault tolerance {:.3} (lost {} keys), adaptability {:.3}",
        run.performance.unwrap_or(0.0),
        run.fault_tolerance.score,
        run.fault_tolerance.lost_keys,
        run.adaptability
    );
    for s in &run.shifts {
        let took = s.recovery.map_or("never".to_string(), |r| format!("{r} s"));
        println!("  shift at {}: rebalanced in {took}, {} records moved, score {:.3}", s.at, s.moved, s.score);
    }
    let series = &report.series[&run.strategy];
    println!("{:>7} {:>8} {:>8} {:>6}", "t", "ok", "p95", "cv");
    for (i, t) in series.bucket_time.iter().enumerate().step_by(10) {
        println!(
            "{t:>7} {:>8} {:>8.3} {:>6.2}",
            series.metrics["requests_ok"][i], series.metrics["latency_p95"][i], series.metrics["load_cv"][i]
        );
    }
    Ok(())
}
