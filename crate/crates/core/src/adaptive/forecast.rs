//! Per-shard load history and Holt linear smoothing.
//!
//! ```text
//! level_0 = x_0,  trend_0 = 0
//! level_t = α x_t + (1 − α)(level_{t−1} + trend_{t−1})
//! trend_t = β (level_t − level_{t−1}) + (1 − β) trend_{t−1}
//! ŷ_{t+h} = max(0, level_t + h · trend_t)
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Level smoothing, in `(0, 1]`.
    pub alpha: f64,
    /// Trend smoothing, in `[0, 1]`.
    pub beta: f64,
    /// Buckets ahead to predict.
    pub horizon: u32,
    /// Predicted utilisation above which a shard splits.
    pub split_threshold: f64,
    /// Predicted utilisation below which a shard may merge.
    pub merge_threshold: f64,
    /// Nodes predicted above `(1 + balance_slack)` times the cluster mean
    /// shed load even when under the split threshold.
    pub balance_slack: f64,
    /// Buckets kept per shard.
    pub history_len: usize,
    /// Seconds between rebalance rounds; also the history bucket width.
    pub rebalance_interval: f64,
    /// Box sizes `2^-1 .. 2^-K` used for the fractal dimension.
    pub fractal_scales: u32,
    /// Record budget of a shard with dimension 1. Unset means four times the
    /// mean initial shard size.
    pub base_shard_size: Option<u64>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            alpha: 0.5,
            beta: 0.3,
            horizon: 1,
            split_threshold: 0.8,
            merge_threshold: 0.3,
            balance_slack: 0.25,
            history_len: 12,
            rebalance_interval: 300.0,
            fractal_scales: 8,
            base_shard_size: None,
        }
    }
}

/// Ring buffer of `(bucket end, load)` observations, oldest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadHistory {
    buckets: VecDeque<(SimTime, f64)>,
    capacity: usize,
}

impl LoadHistory {
    pub fn new(capacity: usize) -> Self {
        LoadHistory {
            buckets: VecDeque::with_capacity(capacity),
            capacity: capacity.max(2),
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut h = LoadHistory::new(values.len().max(2));
        for (i, &v) in values.iter().enumerate() {
            h.push(SimTime::from_secs(i as u64 + 1), v);
        }
        h
    }

    /// Appends a bucket. Buckets must arrive in time order; negative loads
    /// are clamped to zero.
    pub fn push(&mut self, end: SimTime, load: f64) {
        if let Some(&(last, _)) = self.buckets.back() {
            debug_assert!(end > last, "history buckets must be ordered");
        }
        if self.buckets.len() == self.capacity {
            self.buckets.pop_front();
        }
        self.buckets.push_back((end, load.max(0.0)));
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.buckets.back().map(|b| b.1)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.buckets.iter().map(|b| b.1)
    }

    /// A copy with every load multiplied by `factor`; used when a shard is
    /// split and its children inherit a share of its past.
    pub fn scaled(&self, factor: f64) -> LoadHistory {
        LoadHistory {
            buckets: self.buckets.iter().map(|&(t, v)| (t, v * factor)).collect(),
            capacity: self.capacity,
        }
    }

    /// Element-wise sum with `other`, aligned on the most recent bucket.
    pub fn merged(&self, other: &LoadHistory) -> LoadHistory {
        let mut out = self.clone();
        let n = out.buckets.len().min(other.buckets.len());
        let (a0, b0) = (out.buckets.len() - n, other.buckets.len() - n);
        for i in 0..n {
            out.buckets[a0 + i].1 += other.buckets[b0 + i].1;
        }
        out
    }
}

/// Predicted load `cfg.horizon` buckets after the last observation.
pub fn forecast(history: &LoadHistory, cfg: &ForecastConfig) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory(history.len()));
    }
    let mut values = history.values();
    let mut level = values.next().expect("len >= 2");
    let mut trend = 0.0;
    for x in values {
        let prev = level;
        level = cfg.alpha * x + (1.0 - cfg.alpha) * (level + trend);
        trend = cfg.beta * (level - prev) + (1.0 - cfg.beta) * trend;
    }
    Ok((level + cfg.horizon as f64 * trend).max(0.0))
}
