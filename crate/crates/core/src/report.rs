//! The `run`, `compare` and `plotdata` commands and the report format they
//! share.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    adaptability_score, fault_tolerance_score, normalize, performance_score, scalability_score, throughput,
    FaultTolerance, MetricBucket, NormalizedTable, RawScores, ScalePoint, ShiftRecovery,
};
use crate::sim::{run_scenario, PlacementAudit, SimTrace};
use crate::strategies::{KeyHasher, StrategyKind};

pub const REPORT_VERSION: u32 = 1;

/// Per-bucket series of one strategy, averaged over seeds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// Bucket start, seconds.
    pub bucket_time: Vec<f64>,
    pub metrics: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub requests: u64,
    pub requests_ok: u64,
    /// Successful requests per simulated second.
    pub throughput: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub performance: Option<f64>,
    pub fault_tolerance: FaultTolerance,
    pub adaptability: f64,
    pub shifts: Vec<ShiftRecovery>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalability: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub scale_points: Vec<ScalePoint>,
    pub migrated_records: u64,
    pub live_shards: usize,
    pub audit: PlacementAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportWarning {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub time: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_version: u32,
    pub command: String,
    pub config: ScenarioConfig,
    pub hash_function: String,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_scores: Option<BTreeMap<StrategyKind, RawScores>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized: Option<NormalizedTable>,
    pub series: BTreeMap<StrategyKind, Series>,
    pub warnings: Vec<ReportWarning>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// A fixed-width text rendering of the normalised table, if any.
    pub fn table(&self) -> Option<String> {
        let t = self.normalized.as_ref()?;
        let mut out = format!("{:<12}", "strategy");
        for c in RawScores::COLUMNS {
            let _ = write!(out, "{c:>16}");
        }
        out.push('\n');
        for (k, r) in &t.rows {
            let _ = write!(out, "{:<12}", k.as_str());
            for c in RawScores::COLUMNS {
                let _ = write!(out, "{:>16.3}", r.get(c));
            }
            out.push('\n');
        }
        Some(out)
    }
}

/// A fresh seed from the operating system, for runs given none.
pub fn entropy_seed() -> u64 {
    rand::random()
}

struct Finished {
    summary: RunSummary,
    buckets: Vec<MetricBucket>,
    warnings: Vec<ReportWarning>,
}

fn summarize(trace: SimTrace, window: f64) -> Finished {
    let ok = trace.requests.iter().filter(|r| r.outcome.is_ok()).count() as u64;
    let (adaptability, shifts) = adaptability_score(&trace, window);
    let warnings = trace
        .warnings
        .iter()
        .map(|w| ReportWarning {
            strategy: trace.strategy,
            seed: trace.seed,
            time: w.time.as_secs_f64(),
            kind: w.kind.clone(),
            detail: w.detail.clone(),
        })
        .collect();
    let summary = RunSummary {
        strategy: trace.strategy,
        seed: trace.seed,
        requests: trace.requests.len() as u64,
        requests_ok: ok,
        throughput: throughput(&trace),
        performance: performance_score(&trace).ok(),
        fault_tolerance: fault_tolerance_score(&trace),
        adaptability,
        shifts,
        scalability: None,
        scale_points: Vec::new(),
        migrated_records: trace.buckets.iter().map(|b| b.migration_moved).sum(),
        live_shards: trace.live_shards,
        audit: trace.audit,
    };
    Finished {
        summary,
        buckets: trace.buckets,
        warnings,
    }
}

fn run_one(cfg: &ScenarioConfig, strategy: StrategyKind, seed: u64) -> Result<Finished> {
    let mut c = cfg.clone();
    c.strategy = strategy;
    Ok(summarize(run_scenario(&c, seed)?, cfg.metrics.adaptation_window))
}

fn series_of(runs: &[&[MetricBucket]]) -> Series {
    let mut s = Series::default();
    let Some(len) = runs.iter().map(|r| r.len()).min() else {
        return s;
    };
    s.bucket_time = runs[0][..len].iter().map(|b| b.start.as_secs_f64()).collect();
    for i in 0..len {
        let mut sums: BTreeMap<&'static str, f64> = BTreeMap::new();
        for r in runs {
            for (name, v) in r[i].series() {
                *sums.entry(name).or_insert(0.0) += v;
            }
        }
        for (name, total) in sums {
            s.metrics
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; len])[i] = total / runs.len() as f64;
        }
    }
    s
}

/// One simulation of `cfg.strategy`. The seed is `seed`, else the config's,
/// else drawn from entropy; whichever is used is echoed in the report.
pub fn cmd_run(cfg: &ScenarioConfig, seed: Option<u64>) -> Result<Report> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    cfg.resolve();
    let seed = seed.or(cfg.seed).unwrap_or_else(entropy_seed);
    cfg.seed = Some(seed);
    let trace = run_scenario(&cfg, seed)?;
    let finished = summarize(trace, cfg.metrics.adaptation_window);
    let mut series = BTreeMap::new();
    series.insert(cfg.strategy, series_of(&[&finished.buckets]));
    Ok(Report {
        report_version: REPORT_VERSION,
        command: "run".into(),
        hash_function: KeyHasher::new(cfg.partitioning.hash_seed).identifier(),
        strategies: vec![cfg.strategy],
        seeds: vec![seed],
        runs: vec![finished.summary],
        raw_scores: None,
        normalized: None,
        series,
        warnings: finished.warnings,
        config: cfg,
    })
}

/// Node counts of the scalability series: N/4, N/2 and N.
pub fn scale_steps(nodes: usize) -> [usize; 3] {
    [(nodes / 4).max(1), (nodes / 2).max(1), nodes]
}

/// Every strategy under every seed, with matched random streams, plus the
/// N/4 and N/2 runs the scalability score needs. Runs execute in parallel;
/// the report is assembled in strategy and seed order.
pub fn cmd_compare(cfg: &ScenarioConfig, strategies: &[StrategyKind], seeds: &[u64]) -> Result<Report> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    cfg.resolve();
    if strategies.len() < 2 {
        return Err(Error::schema("strategies", "compare needs at least 2 strategies"));
    }
    if seeds.is_empty() {
        return Err(Error::schema("seeds", "compare needs at least 1 seed"));
    }
    let steps = scale_steps(cfg.nodes);
    let jobs: Vec<(StrategyKind, u64, usize)> = strategies
        .iter()
        .flat_map(|&k| seeds.iter().flat_map(move |&s| steps.into_iter().map(move |n| (k, s, n))))
        .collect();
    let done: Vec<Result<Finished>> = jobs
        .par_iter()
        .map(|&(k, s, n)| {
            let c = if n == cfg.nodes { cfg.clone() } else { cfg.scaled(n) };
            run_one(&c, k, s)
        })
        .collect();
    let mut done = done.into_iter().collect::<Result<Vec<_>>>()?.into_iter();

    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    let mut raw = BTreeMap::new();
    let mut series = BTreeMap::new();
    for &k in strategies {
        let mut per_seed = Vec::new();
        let mut buckets = Vec::new();
        for _ in seeds {
            let quarter = done.next().expect("one result per job");
            let half = done.next().expect("one result per job");
            let mut full = done.next().expect("one result per job");
            let point = |f: &Finished, nodes: usize| ScalePoint {
                nodes,
                throughput: f.summary.throughput,
            };
            let points = [point(&quarter, steps[0]), point(&half, steps[1]), point(&full, steps[2])];
            let scal = scalability_score(Some(points[0]), Some(points[1]), Some(points[2]))?;
            full.summary.scalability = Some(scal);
            full.summary.scale_points = points.to_vec();
            per_seed.push(RawScores {
                scalability: scal,
                performance: full.summary.performance.unwrap_or(0.0),
                fault_tolerance: full.summary.fault_tolerance.score,
                adaptability: full.summary.adaptability,
            });
            warnings.extend(full.warnings);
            buckets.push(full.buckets);
            runs.push(full.summary);
        }
        raw.insert(k, RawScores::mean(&per_seed));
        let refs: Vec<&[MetricBucket]> = buckets.iter().map(Vec::as_slice).collect();
        series.insert(k, series_of(&refs));
    }
    let normalized = normalize(&raw)?;
    Ok(Report {
        report_version: REPORT_VERSION,
        command: "compare".into(),
        hash_function: KeyHasher::new(cfg.partitioning.hash_seed).identifier(),
        strategies: strategies.to_vec(),
        seeds: seeds.to_vec(),
        runs,
        raw_scores: Some(raw),
        normalized: Some(normalized),
        series,
        warnings,
        config: cfg,
    })
}

#[derive(Deserialize)]
struct PlotSource {
    series: BTreeMap<String, Series>,
}

/// Flattens a report's series into `bucket_time,strategy,metric_name,value`
/// rows under a header.
pub fn plotdata(report_json: &str) -> Result<String> {
    let src: PlotSource = serde_json::from_str(report_json).map_err(|e| Error::MalformedReport(e.to_string()))?;
    let mut out = String::from("bucket_time,strategy,metric_name,value\n");
    for (strategy, s) in &src.series {
        for (name, values) in &s.metrics {
            if values.len() != s.bucket_time.len() {
                return Err(Error::MalformedReport(format!(
                    "series `{strategy}.{name}` has {} values for {} buckets",
                    values.len(),
                    s.bucket_time.len()
                )));
            }
        }
        for (i, t) in s.bucket_time.iter().enumerate() {
            for (name, values) in &s.metrics {
                let _ = writeln!(out, "{t},{strategy},{name},{}", values[i]);
            }
        }
    }
    Ok(out)
}

/// Reads a report file and writes its plot rows to `out`. Returns the
/// number of data rows.
pub fn cmd_plotdata(report: &Path, out: &Path) -> Result<usize> {
    let text = fs::read_to_string(report).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(report.to_path_buf()),
        _ => Error::Io(format!("{}: {e}", report.display())),
    })?;
    let rows = plotdata(&text)?;
    fs::write(out, &rows).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    Ok(rows.lines().count() - 1)
}
