//! The four comparison scores computed from simulation traces, and their
//! column-max normalisation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimTrace;
use crate::strategies::StrategyKind;
use crate::time::SimTime;

/// Load CV below which the cluster counts as balanced.
pub const BALANCED_CV: f64 = 0.5;
/// Consecutive balanced buckets needed to count as re-adapted.
pub const SUSTAIN_BUCKETS: usize = 3;
/// Upper bound of the scalability score.
pub const SCALABILITY_CAP: f64 = 1.2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatCensus {
    pub hot: usize,
    pub warm: usize,
    pub cold: usize,
}

/// Aggregates over one fixed-width slice of simulated time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBucket {
    pub index: usize,
    pub start: SimTime,
    pub requests_total: u64,
    pub requests_ok: u64,
    /// Seconds, over successful requests.
    pub latency_sum: f64,
    /// Exact nearest-rank 95th percentile, seconds.
    pub latency_p95: f64,
    /// Fewest nodes up at any instant of the bucket.
    pub live_nodes: usize,
    /// Some node was failed or degraded during the bucket.
    pub failure_active: bool,
    pub migration_moved: u64,
    /// Coefficient of variation of requests routed to each live node.
    pub load_cv: f64,
    /// Seconds, averaged over all replicas at the bucket's end.
    pub mean_staleness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heat: Option<HeatCensus>,
}

impl MetricBucket {
    /// Named numeric fields, in export order.
    pub fn series(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("requests_total", self.requests_total as f64),
            ("requests_ok", self.requests_ok as f64),
            ("latency_sum", self.latency_sum),
            ("latency_p95", self.latency_p95),
            ("live_nodes", self.live_nodes as f64),
            ("failure_active", f64::from(u8::from(self.failure_active))),
            ("migration_moved", self.migration_moved as f64),
            ("load_cv", self.load_cv),
            ("mean_staleness", self.mean_staleness),
        ];
        if let Some(h) = self.heat {
            out.push(("heat_hot", h.hot as f64));
            out.push(("heat_warm", h.warm as f64));
            out.push(("heat_cold", h.cold as f64));
        }
        out
    }
}

/// Nearest-rank percentile `q` in `(0, 1]`; sorts `values`. Zero when empty.
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// Population standard deviation over mean; zero for empty or idle input.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub scalability: f64,
    pub performance: f64,
    pub fault_tolerance: f64,
    pub adaptability: f64,
}

impl RawScores {
    pub const COLUMNS: [&'static str; 4] = ["scalability", "performance", "fault_tolerance", "adaptability"];

    pub fn get(&self, column: &str) -> f64 {
        match column {
            "scalability" => self.scalability,
            "performance" => self.performance,
            "fault_tolerance" => self.fault_tolerance,
            "adaptability" => self.adaptability,
            _ => panic!("unknown metric column `{column}`"),
        }
    }

    fn set(&mut self, column: &str, v: f64) {
        match column {
            "scalability" => self.scalability = v,
            "performance" => self.performance = v,
            "fault_tolerance" => self.fault_tolerance = v,
            "adaptability" => self.adaptability = v,
            _ => panic!("unknown metric column `{column}`"),
        }
    }

    /// Element-wise mean.
    pub fn mean(all: &[RawScores]) -> RawScores {
        let mut out = RawScores::default();
        if all.is_empty() {
            return out;
        }
        for c in Self::COLUMNS {
            out.set(c, all.iter().map(|s| s.get(c)).sum::<f64>() / all.len() as f64);
        }
        out
    }
}

/// Scores divided by their column maximum, per strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedTable {
    pub rows: BTreeMap<StrategyKind, RawScores>,
}

/// `success_ratio / (1 + p95)` with p95 over successful requests in seconds.
pub fn performance_score(trace: &SimTrace) -> Result<f64> {
    let total = trace.requests.len();
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    let mut lat: Vec<f64> = trace
        .requests
        .iter()
        .filter_map(|r| r.latency())
        .map(SimTime::as_secs_f64)
        .collect();
    let ok = lat.len();
    Ok(performance_from(ok as f64 / total as f64, percentile(&mut lat, 0.95)))
}

pub fn performance_from(success_ratio: f64, p95_secs: f64) -> f64 {
    success_ratio / (1.0 + p95_secs)
}

/// Successful requests per simulated second.
pub fn throughput(trace: &SimTrace) -> f64 {
    let ok = trace.requests.iter().filter(|r| r.outcome.is_ok()).count();
    ok as f64 / trace.end.as_secs_f64().max(1e-9)
}

/// One run of a scalability series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub nodes: usize,
    pub throughput: f64,
}

/// Runs at N/4, N/2 and N nodes. Each larger run scores its throughput ratio
/// to the N/4 run divided by its node ratio; the score is the mean of the
/// two, capped.
pub fn scalability_score(quarter: Option<ScalePoint>, half: Option<ScalePoint>, full: Option<ScalePoint>) -> Result<f64> {
    let base = quarter.ok_or(Error::MissingRun("N/4"))?;
    let half = half.ok_or(Error::MissingRun("N/2"))?;
    let full = full.ok_or(Error::MissingRun("N"))?;
    let step = |p: ScalePoint| {
        let node_ratio = p.nodes as f64 / base.nodes as f64;
        let tput_ratio = if base.throughput > 0.0 {
            p.throughput / base.throughput
        } else if p.throughput > 0.0 {
            node_ratio
        } else {
            0.0
        };
        tput_ratio / node_ratio
    };
    Ok(((step(half) + step(full)) / 2.0).clamp(0.0, SCALABILITY_CAP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTolerance {
    pub score: f64,
    pub availability: f64,
    pub lost_keys: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Success ratio over buckets with a failed or degraded node, times the
/// fraction of keys that survived.
pub fn fault_tolerance_score(trace: &SimTrace) -> FaultTolerance {
    let failing: Vec<_> = trace.buckets.iter().filter(|b| b.failure_active).collect();
    if failing.is_empty() && trace.lost_keys == 0 {
        return FaultTolerance {
            score: 1.0,
            availability: 1.0,
            lost_keys: 0,
            note: Some("no-failure".into()),
        };
    }
    let total: u64 = failing.iter().map(|b| b.requests_total).sum();
    let ok: u64 = failing.iter().map(|b| b.requests_ok).sum();
    let availability = if total == 0 { 1.0 } else { ok as f64 / total as f64 };
    let intact = 1.0 - trace.lost_keys as f64 / trace.key_count.max(1) as f64;
    FaultTolerance {
        score: availability * intact,
        availability,
        lost_keys: trace.lost_keys,
        note: None,
    }
}

pub fn fault_tolerance_from(availability: f64, lost_fraction: f64) -> f64 {
    availability * (1.0 - lost_fraction)
}

/// How one pattern shift was absorbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecovery {
    pub at: SimTime,
    /// Seconds until the load CV stayed balanced; `None` if it never did.
    pub recovery: Option<f64>,
    pub moved: u64,
    pub score: f64,
}

pub fn adaptability_from(recovery: Option<f64>, window: f64, moved_fraction: f64) -> f64 {
    let time = recovery.map_or(0.0, |t| (1.0 - t / window).max(0.0));
    time * (1.0 - moved_fraction).max(0.0)
}

/// Mean over shifts of `max(0, 1 − T_r/T_max) · (1 − moved/keys)`, where
/// `T_r` counts buckets from the shift until the load CV stays below 0.5 for
/// three buckets and `moved` sums migrations within `window` seconds of the
/// shift. 1.0 with no shifts.
pub fn adaptability_score(trace: &SimTrace, window: f64) -> (f64, Vec<ShiftRecovery>) {
    if trace.shift_times.is_empty() {
        return (1.0, Vec::new());
    }
    let width = trace.bucket_width.as_micros().max(1);
    let window_end = |at: SimTime| at + SimTime::from_secs_f64(window);
    let mut out = Vec::new();
    for &at in &trace.shift_times {
        let first = (at.as_micros() / width) as usize;
        let buckets = trace.buckets.get(first..).unwrap_or(&[]);
        let recovery = (0..buckets.len())
            .find(|&j| {
                buckets.len() >= j + SUSTAIN_BUCKETS
                    && buckets[j..j + SUSTAIN_BUCKETS].iter().all(|b| b.load_cv < BALANCED_CV)
            })
            .map(|j| j as f64 * trace.bucket_width.as_secs_f64());
        let end = window_end(at);
        let moved: u64 = trace
            .buckets
            .iter()
            .filter(|b| b.start + trace.bucket_width > at && b.start < end)
            .map(|b| b.migration_moved)
            .sum();
        let score = adaptability_from(recovery, window, moved as f64 / trace.key_count.max(1) as f64);
        out.push(ShiftRecovery {
            at,
            recovery,
            moved,
            score,
        });
    }
    let mean = out.iter().map(|s| s.score).sum::<f64>() / out.len() as f64;
    (mean, out)
}

/// Divides each column by its maximum over strategies.
pub fn normalize(raw: &BTreeMap<StrategyKind, RawScores>) -> Result<NormalizedTable> {
    let mut rows: BTreeMap<StrategyKind, RawScores> = raw.keys().map(|&k| (k, RawScores::default())).collect();
    for c in RawScores::COLUMNS {
        let max = raw.values().map(|s| s.get(c)).fold(0.0, f64::max);
        if max.is_nan() || max <= 0.0 {
            return Err(Error::AllZeroColumn(c));
        }
        for (k, s) in raw {
            rows.get_mut(k).expect("same keys").set(c, s.get(c) / max);
        }
    }
    Ok(NormalizedTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn performance_examples() {
        assert_eq!(performance_from(1.0, 0.0), 1.0);
        assert_eq!(performance_from(1.0, 1.0), 0.5);
        assert_eq!(performance_from(0.5, 0.0), 0.5);
    }

    fn pt(nodes: usize, throughput: f64) -> Option<ScalePoint> {
        Some(ScalePoint { nodes, throughput })
    }

    #[test]
    fn linear_scaling_scores_one() {
        let s = scalability_score(pt(4, 10.0), pt(8, 20.0), pt(16, 40.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_and_a_half_on_a_doubling_step() {
        // N/2 step: ratio 1.5 over 2x nodes; N step kept ideal at 4x.
        let s = scalability_score(pt(4, 10.0), pt(8, 15.0), pt(16, 40.0)).unwrap();
        assert!((s - (0.75 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_throughput() {
        let s = scalability_score(pt(4, 10.0), pt(8, 10.0), pt(16, 10.0)).unwrap();
        assert!((s - 0.375).abs() < 1e-12);
    }

    #[test]
    fn scalability_is_capped() {
        let s = scalability_score(pt(4, 1.0), pt(8, 10.0), pt(16, 100.0)).unwrap();
        assert_eq!(s, SCALABILITY_CAP);
    }

    #[test]
    fn missing_run() {
        assert_eq!(scalability_score(pt(4, 1.0), None, pt(16, 1.0)), Err(Error::MissingRun("N/2")));
    }

    #[test]
    fn fault_tolerance_examples() {
        assert!((fault_tolerance_from(0.9, 0.0) - 0.9).abs() < 1e-12);
        assert!((fault_tolerance_from(0.9, 0.05) - 0.855).abs() < 1e-12);
    }

    #[test]
    fn adaptability_examples() {
        assert_eq!(adaptability_from(Some(0.0), 300.0, 0.0), 1.0);
        assert_eq!(adaptability_from(Some(300.0), 300.0, 0.0), 0.0);
        assert!((adaptability_from(Some(150.0), 300.0, 0.1) - 0.45).abs() < 1e-12);
        assert_eq!(adaptability_from(None, 300.0, 0.0), 0.0);
    }

    fn raw(s: f64, p: f64) -> RawScores {
        RawScores {
            scalability: s,
            performance: p,
            fault_tolerance: 1.0,
            adaptability: 1.0,
        }
    }

    #[test]
    fn normalize_divides_by_column_max() {
        let t = normalize(&[(StrategyKind::Hash, raw(3.0, 1.0)), (StrategyKind::Adaptive, raw(4.0, 1.0))].into()).unwrap();
        assert_eq!(t.rows[&StrategyKind::Hash].scalability, 0.75);
        assert_eq!(t.rows[&StrategyKind::Adaptive].scalability, 1.0);
    }

    #[test]
    fn single_strategy_normalizes_to_one() {
        let t = normalize(&[(StrategyKind::Range, raw(0.3, 0.2))].into()).unwrap();
        let r = t.rows[&StrategyKind::Range];
        assert!(RawScores::COLUMNS.iter().all(|c| r.get(c) == 1.0));
    }

    #[test]
    fn all_zero_column_is_an_error() {
        let e = normalize(&[(StrategyKind::Range, raw(0.0, 0.2))].into()).unwrap_err();
        assert_eq!(e, Error::AllZeroColumn("scalability"));
    }

    #[test]
    fn p95_is_nearest_rank() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&mut v, 0.95), 95.0);
        let mut one = vec![7.0];
        assert_eq!(percentile(&mut one, 0.95), 7.0);
        assert_eq!(percentile(&mut [], 0.95), 0.0);
    }

    #[test]
    fn cv_of_equal_loads_is_zero() {
        assert_eq!(coefficient_of_variation(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(coefficient_of_variation(&[0.0, 0.0]), 0.0);
        assert!((coefficient_of_variation(&[0.0, 2.0]) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(
            cols in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..5),
            c in 0.01f64..100.0,
        ) {
            let kinds = StrategyKind::ALL;
            let a: BTreeMap<_, _> = cols.iter().enumerate().map(|(i, &(s, p))| (kinds[i % 4], raw(s, p))).collect();
            let b: BTreeMap<_, _> = a.iter().map(|(&k, r)| (k, RawScores { scalability: r.scalability * c, ..*r })).collect();
            let (na, nb) = (normalize(&a).unwrap(), normalize(&b).unwrap());
            for k in a.keys() {
                prop_assert!((na.rows[k].scalability - nb.rows[k].scalability).abs() < 1e-9);
                let max = RawScores::COLUMNS.iter().map(|col| na.rows.values().map(|r| r.get(col)).fold(0.0, f64::max));
                for m in max {
                    prop_assert!((m - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn p95_matches_sorted_index(mut v in prop::collection::vec(0.0f64..10.0, 1..500)) {
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let idx = (0.95 * v.len() as f64).ceil() as usize - 1;
            prop_assert_eq!(percentile(&mut v, 0.95), sorted[idx]);
        }
    }
}
