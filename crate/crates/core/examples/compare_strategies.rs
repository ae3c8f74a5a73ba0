//! All four strategies over matched seeds, normalised side by side, with the
//! per-bucket series written out for plotting.
//!
//!     cargo run --release --example compare_strategies -- examples/scenarios/periodic.toml

use std::path::PathBuf;

use shardsim::config::parse_config;
use shardsim::report::{cmd_compare, plotdata};
use shardsim::strategies::StrategyKind;

fn main() -> shardsim::Result<()> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| [env!("CARGO_MANIFEST_DIR"), "examples", "scenarios", "skewed.toml"].iter().collect());
    let cfg = parse_config(&path)?;
    let report = cmd_compare(&cfg, &StrategyKind::ALL, &[1, 2, 3])?;

    println!("raw scores (mean of {} seeds)", report.seeds.len());
    for (k, r) in report.raw_scores.as_ref().expect("compare fills raw scores") {
        println!(
            "{:<12} scal {:.3} perf {:.3} ft {:.3} adapt {:.3}",
            k.as_str(),
            r.scalability,
            r.performance,
            r.fault_tolerance,
            r.adaptability
        );
    }
    println!("\nnormalized");
    print!("{}", report.table().expect("compare fills the table"));

    let csv = plotdata(&report.to_json())?;
    let out = std::env::temp_dir().join("shardsim-compare.csv");
    std::fs::write(&out, &csv)?;
    println!("\n{} plot rows in {}", csv.lines().count() - 1, out.display());
    Ok(())
}
