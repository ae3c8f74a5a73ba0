//! Scenario files: a versioned, strictly validated TOML (or JSON) document
//! describing one simulation run.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::adaptive::{ForecastConfig, WindowConfig};
use crate::cluster::{ClusterConfig, FailureSpec};
use crate::error::{Error, Result};
use crate::resilience::ReplicationPolicy;
use crate::strategies::StrategyKind;
use crate::time::SimTime;
use crate::workload::{Pattern, WorkloadSpec};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn one() -> usize {
    1
}

fn default_bucket_width() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionConfig {
    /// Shards for range and hash partitioning. Unset means one per node.
    pub n_shards: Option<u32>,
    /// Ring positions per node.
    pub vnodes: u32,
    pub hash_seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            n_shards: None,
            vnodes: 128,
            hash_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Seconds after a pattern shift within which the cluster should
    /// re-balance; recovery taking this long scores zero.
    pub adaptation_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            adaptation_window: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub nodes: usize,
    #[serde(default = "one")]
    pub regions: usize,
    /// Simulated seconds.
    pub duration: f64,
    #[serde(default = "default_bucket_width")]
    pub bucket_width: f64,
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub partitioning: PartitionConfig,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub replication: ReplicationPolicy,
    #[serde(default)]
    pub windows: WindowConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub failure: FailureSpec,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl ScenarioConfig {
    /// A config with every optional knob at its default.
    pub fn new(nodes: usize, duration: f64, strategy: StrategyKind) -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            nodes,
            regions: 1,
            duration,
            bucket_width: default_bucket_width(),
            strategy,
            seed: None,
            cluster: ClusterConfig::default(),
            partitioning: PartitionConfig::default(),
            workload: WorkloadSpec::default(),
            replication: ReplicationPolicy::default(),
            windows: WindowConfig::default(),
            forecast: ForecastConfig::default(),
            failure: FailureSpec::default(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn duration_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration)
    }

    pub fn bucket_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.bucket_width)
    }

    /// Fills every derived default in place. Idempotent.
    pub fn resolve(&mut self) {
        let nodes = self.nodes.max(1) as u64;
        let keys = self.workload.key_count.max(1);
        self.cluster.storage_limit.get_or_insert_with(|| {
            3 * (keys * self.replication.rf.max(1) as u64).div_ceil(nodes) as usize
        });
        let capacity = self.cluster.capacity;
        self.workload
            .base_rate
            .get_or_insert(0.5 * nodes as f64 * capacity);
        self.partitioning.n_shards.get_or_insert(nodes as u32);
        self.replication.repair_rate.get_or_insert(10.0 * capacity);
        let positions = nodes * self.partitioning.vnodes.max(1) as u64;
        self.forecast
            .base_shard_size
            .get_or_insert(4 * keys.div_ceil(positions));
    }

    /// The same scenario on `nodes` nodes, with demand, failure rates and
    /// per-node budgets scaled by the node ratio.
    pub fn scaled(&self, nodes: usize) -> ScenarioConfig {
        let mut c = self.clone();
        c.resolve();
        let ratio = nodes as f64 / self.nodes as f64;
        c.nodes = nodes;
        c.regions = self.regions.min(nodes).max(1);
        c.workload.base_rate = c.workload.base_rate.map(|r| r * ratio);
        for s in &mut c.workload.shifts {
            s.base_rate = s.base_rate.map(|r| r * ratio);
        }
        c.failure.crash_rate *= ratio;
        c.failure.corruption_rate *= ratio;
        c.cluster.storage_limit = c.cluster.storage_limit.map(|l| (l as f64 / ratio).ceil() as usize);
        c.partitioning.n_shards = c
            .partitioning
            .n_shards
            .map(|n| ((n as f64 * ratio).round() as u32).max(1));
        c.forecast.base_shard_size = c
            .forecast
            .base_shard_size
            .map(|b| ((b as f64 / ratio).round() as u64).max(1));
        c
    }

    /// Checks every documented constraint, naming the first violated field.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| if ok { Ok(()) } else { Err(Error::schema(field, reason)) };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let unit = |v: f64| (0.0..=1.0).contains(&v);

        check(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            &format!("unsupported version, expected {SCHEMA_VERSION}"),
        )?;
        check(self.nodes >= 1, "nodes", "must be ≥ 1")?;
        check(self.regions >= 1, "regions", "must be ≥ 1")?;
        check(pos(self.duration), "duration", "must be > 0")?;
        check(pos(self.bucket_width), "bucket_width", "must be > 0")?;

        let c = &self.cluster;
        check(pos(c.capacity), "cluster.capacity", "must be > 0")?;
        check(c.queue_limit >= 1, "cluster.queue_limit", "must be ≥ 1")?;
        check(c.storage_limit.is_none_or(|l| l >= 1), "cluster.storage_limit", "must be ≥ 1")?;

        let p = &self.partitioning;
        check(p.n_shards.is_none_or(|n| n >= 1), "partitioning.n_shards", "must be ≥ 1")?;
        check(p.vnodes >= 1, "partitioning.vnodes", "must be ≥ 1")?;

        let w = &self.workload;
        check(w.key_count >= 1, "workload.key_count", "must be ≥ 1")?;
        check(nonneg(w.zipf_exponent), "workload.zipf_exponent", "must be ≥ 0")?;
        check(w.base_rate.is_none_or(nonneg), "workload.base_rate", "must be ≥ 0")?;
        check(unit(w.read_ratio), "workload.read_ratio", "must be in [0, 1]")?;
        check_pattern(&w.pattern, "workload.pattern")?;
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in w.shifts.iter().enumerate() {
            let field = |name: &str| format!("workload.shifts[{i}].{name}");
            if !(nonneg(s.at) && s.at > prev) {
                return Err(Error::schema(field("at"), "shift times must be ≥ 0 and strictly increasing"));
            }
            prev = s.at;
            if s.zipf_exponent.is_some_and(|v| !nonneg(v)) {
                return Err(Error::schema(field("zipf_exponent"), "must be ≥ 0"));
            }
            if s.base_rate.is_some_and(|v| !nonneg(v)) {
                return Err(Error::schema(field("base_rate"), "must be ≥ 0"));
            }
            if s.read_ratio.is_some_and(|v| !unit(v)) {
                return Err(Error::schema(field("read_ratio"), "must be in [0, 1]"));
            }
            if let Some(pat) = &s.pattern {
                check_pattern(pat, &field("pattern"))?;
            }
        }

        let r = &self.replication;
        check(r.rf >= 1, "replication.rf", "must be ≥ 1")?;
        check(pos(r.sync_interval), "replication.sync_interval", "must be > 0")?;
        check(r.repair_rate.is_none_or(pos), "replication.repair_rate", "must be > 0")?;
        check(pos(r.repair_parallelism), "replication.repair_parallelism", "must be > 0")?;

        let win = &self.windows;
        check(pos(win.hot_window), "windows.hot_window", "must be > 0")?;
        check(
            win.warm_window.is_finite() && win.warm_window > win.hot_window,
            "windows.warm_window",
            "must exceed hot_window",
        )?;

        let f = &self.forecast;
        check(f.alpha > 0.0 && f.alpha <= 1.0, "forecast.alpha", "must be in (0, 1]")?;
        check(unit(f.beta), "forecast.beta", "must be in [0, 1]")?;
        check(f.horizon >= 1, "forecast.horizon", "must be ≥ 1")?;
        check(
            f.split_threshold > 0.0 && f.split_threshold <= 1.0,
            "forecast.split_threshold",
            "must be in (0, 1]",
        )?;
        check(
            nonneg(f.merge_threshold) && f.merge_threshold < f.split_threshold,
            "forecast.merge_threshold",
            "must be ≥ 0 and below split_threshold",
        )?;
        check(nonneg(f.balance_slack), "forecast.balance_slack", "must be ≥ 0")?;
        check(f.history_len >= 2, "forecast.history_len", "must be ≥ 2")?;
        check(pos(f.rebalance_interval), "forecast.rebalance_interval", "must be > 0")?;
        check(f.fractal_scales >= 3, "forecast.fractal_scales", "must be ≥ 3")?;
        check(f.base_shard_size.is_none_or(|b| b >= 1), "forecast.base_shard_size", "must be ≥ 1")?;

        let fl = &self.failure;
        check(nonneg(fl.crash_rate), "failure.crash_rate", "must be ≥ 0")?;
        check(pos(fl.mean_downtime), "failure.mean_downtime", "must be > 0")?;
        check(nonneg(fl.corruption_rate), "failure.corruption_rate", "must be ≥ 0")?;
        check(unit(fl.corruption_fraction), "failure.corruption_fraction", "must be in [0, 1]")?;

        check(pos(self.metrics.adaptation_window), "metrics.adaptation_window", "must be > 0")?;
        Ok(())
    }
}

fn check_pattern(p: &Pattern, field: &str) -> Result<()> {
    if let Some(period) = p.period() {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::schema(format!("{field}.period"), "must be > 0"));
        }
    }
    if !(0.0..=1.0).contains(&p.amplitude()) {
        return Err(Error::schema(format!("{field}.amplitude"), "must be in [0, 1]"));
    }
    Ok(())
}

/// Reads, validates and resolves a scenario file. Files ending in `.json`
/// are read as JSON, everything else as TOML.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        parse_json(&text)
    } else {
        parse_toml(&text)
    }
}

pub fn parse_toml(text: &str) -> Result<ScenarioConfig> {
    let value: toml::Value = toml::from_str(text).map_err(|e| Error::schema("<document>", e.message().to_string()))?;
    finish(strict(value)?)
}

pub fn parse_json(text: &str) -> Result<ScenarioConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::schema("<document>", e.to_string()))?;
    finish(strict(value)?)
}

fn finish(mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
    cfg.validate()?;
    cfg.resolve();
    Ok(cfg)
}

/// Deserializes with unknown fields turned into errors that carry their path.
fn strict<'de, T, D>(de: D) -> Result<T>
where
    T: DeserializeOwned,
    D: serde::Deserializer<'de>,
{
    let mut unknown: Option<String> = None;
    let parsed: std::result::Result<T, _> = {
        let mut note = |p: serde_ignored::Path<'_>| {
            unknown.get_or_insert_with(|| p.to_string());
        };
        serde_path_to_error::deserialize(serde_ignored::Deserializer::new(de, &mut note))
    };
    if let Some(u) = unknown {
        return Err(Error::UnknownField(u));
    }
    parsed.map_err(|e| {
        let field = e.path().to_string();
        let msg = e.inner().to_string();
        if let Some(name) = msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            let full = if field == "." { name.to_string() } else { format!("{field}.{name}") };
            return Error::UnknownField(full);
        }
        Error::schema(if field == "." { "<document>".to_string() } else { field }, msg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_toml("nodes = 4\nduration = 1000\nstrategy = \"consistent\"\n").unwrap();
        assert_eq!(c.nodes, 4);
        assert_eq!(c.regions, 1);
        assert_eq!(c.strategy, StrategyKind::Consistent);
        assert_eq!(c.replication.rf, 2);
        assert_eq!(c.partitioning.vnodes, 128);
        assert_eq!(c.windows.hot_window, 3600.0);
        assert_eq!(c.workload.zipf_exponent, 1.1);
        assert_eq!(c.workload.base_rate, Some(200.0));
        assert_eq!(c.cluster.storage_limit, Some(3 * 5000));
        assert_eq!(c.failure.crash_rate, 0.0);
    }

    #[test]
    fn rf_zero_is_rejected() {
        let e = parse_toml("nodes = 4\nduration = 1000\nstrategy = \"hash\"\n[replication]\nrf = 0\n").unwrap_err();
        assert_eq!(e, Error::schema("replication.rf", "must be ≥ 1"));
    }

    #[test]
    fn misspelled_field_is_unknown() {
        let e = parse_toml("nodez = 4\nnodes = 4\nduration = 1000\nstrategy = \"hash\"\n").unwrap_err();
        assert_eq!(e, Error::UnknownField("nodez".into()));
    }

    #[test]
    fn nested_unknown_field_has_path() {
        let e = parse_toml("nodes = 4\nduration = 10\nstrategy = \"hash\"\n[failure]\ncrash = 1.0\n").unwrap_err();
        assert_eq!(e, Error::UnknownField("failure.crash".into()));
    }

    #[test]
    fn wrong_schema_version() {
        let e = parse_toml("schema_version = 2\nnodes = 4\nduration = 10\nstrategy = \"hash\"\n").unwrap_err();
        assert!(matches!(e, Error::SchemaError { ref field, .. } if field == "schema_version"));
    }

    #[test]
    fn type_error_names_field() {
        let e = parse_toml("nodes = \"four\"\nduration = 10\nstrategy = \"hash\"\n").unwrap_err();
        assert!(matches!(e, Error::SchemaError { ref field, .. } if field == "nodes"), "{e:?}");
    }

    #[test]
    fn missing_file() {
        let e = parse_config("/definitely/not/here.toml").unwrap_err();
        assert!(matches!(e, Error::FileNotFound(_)));
    }

    #[test]
    fn resolved_config_round_trips_through_json() {
        let c = parse_toml("nodes = 4\nduration = 100\nstrategy = \"adaptive\"\nseed = 7\n").unwrap();
        let back = parse_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn scaling_keeps_per_node_demand() {
        let mut c = ScenarioConfig::new(16, 100.0, StrategyKind::Hash);
        c.failure.crash_rate = 0.08;
        c.resolve();
        let q = c.scaled(4);
        assert_eq!(q.nodes, 4);
        assert!((q.workload.base_rate.unwrap() - c.workload.base_rate.unwrap() / 4.0).abs() < 1e-9);
        assert!((q.failure.crash_rate - 0.02).abs() < 1e-12);
        assert_eq!(q.partitioning.n_shards, Some(4));
    }
}
