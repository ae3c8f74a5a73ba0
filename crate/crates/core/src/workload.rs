//! Synthetic workload: Zipfian key popularity over Poisson arrivals, with
//! uniform, skewed, periodic and seasonal rate shapes and scheduled pattern
//! shifts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ids::Key;
use crate::rng::RngStream;
use crate::time::SimTime;

/// Default period of the periodic pattern, seconds.
pub const DEFAULT_PERIODIC_PERIOD: f64 = 600.0;
/// Seasonal cycles are the periodic shape stretched 20x.
pub const DEFAULT_SEASONAL_PERIOD: f64 = 20.0 * DEFAULT_PERIODIC_PERIOD;

fn default_periodic_period() -> f64 {
    DEFAULT_PERIODIC_PERIOD
}

fn default_seasonal_period() -> f64 {
    DEFAULT_SEASONAL_PERIOD
}

fn default_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pattern {
    /// Constant rate, every key equally popular.
    Uniform,
    /// Constant rate, Zipfian key popularity.
    Skewed,
    Periodic {
        #[serde(default = "default_periodic_period")]
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Seasonal {
        #[serde(default = "default_seasonal_period")]
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

impl Pattern {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Pattern::Periodic { amplitude, .. } | Pattern::Seasonal { amplitude, .. } => amplitude,
            _ => 0.0,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Pattern::Periodic { period, .. } | Pattern::Seasonal { period, .. } => Some(period),
            _ => None,
        }
    }
}

/// Partial override of the workload, effective from `at` onwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternShift {
    /// Seconds since run start.
    pub at: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zipf_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub read_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hot_offset: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub key_count: u64,
    pub zipf_exponent: f64,
    /// Requests per simulated second. Left unset in a scenario file it is
    /// filled in to load the cluster to 50% of its aggregate capacity.
    pub base_rate: Option<f64>,
    pub read_ratio: f64,
    /// Popularity rank `r` maps to key `(r + hot_offset) mod key_count`;
    /// shifting it moves the hot set.
    pub hot_offset: u64,
    pub pattern: Pattern,
    pub shifts: Vec<PatternShift>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            key_count: 10_000,
            zipf_exponent: 1.1,
            base_rate: None,
            read_ratio: 0.9,
            hot_offset: 0,
            pattern: Pattern::Skewed,
            shifts: Vec::new(),
        }
    }
}

/// The workload parameters in force over one interval between shifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub zipf_exponent: f64,
    pub base_rate: f64,
    pub read_ratio: f64,
    pub hot_offset: u64,
    pub pattern: Pattern,
}

impl Phase {
    pub fn rate_at(&self, t_secs: f64) -> f64 {
        let r = match self.pattern {
            Pattern::Uniform | Pattern::Skewed => self.base_rate,
            Pattern::Periodic { period, amplitude } | Pattern::Seasonal { period, amplitude } => {
                self.base_rate * (1.0 + amplitude * (2.0 * PI * t_secs / period).sin())
            }
        };
        r.max(0.0)
    }

    pub fn peak_rate(&self) -> f64 {
        self.base_rate * (1.0 + self.pattern.amplitude())
    }

    fn key_exponent(&self) -> f64 {
        match self.pattern {
            Pattern::Uniform => 0.0,
            _ => self.zipf_exponent,
        }
    }
}

impl WorkloadSpec {
    pub fn base_rate(&self) -> f64 {
        self.base_rate.unwrap_or(0.0)
    }

    /// Phase `i`: 0 is the base spec, `i > 0` has shifts `0..i` applied.
    pub fn phase(&self, i: usize) -> Phase {
        let mut p = Phase {
            zipf_exponent: self.zipf_exponent,
            base_rate: self.base_rate(),
            read_ratio: self.read_ratio,
            hot_offset: self.hot_offset,
            pattern: self.pattern,
        };
        for s in self.shifts.iter().take(i) {
            if let Some(v) = s.zipf_exponent {
                p.zipf_exponent = v;
            }
            if let Some(v) = s.base_rate {
                p.base_rate = v;
            }
            if let Some(v) = s.read_ratio {
                p.read_ratio = v;
            }
            if let Some(v) = s.hot_offset {
                p.hot_offset = v;
            }
            if let Some(v) = s.pattern {
                p.pattern = v;
            }
        }
        p
    }

    /// Index of the phase active at `t_secs`.
    pub fn phase_index_at(&self, t_secs: f64) -> usize {
        self.shifts.iter().take_while(|s| s.at <= t_secs).count()
    }

    pub fn phase_at(&self, t_secs: f64) -> Phase {
        self.phase(self.phase_index_at(t_secs))
    }

    pub fn peak_rate(&self) -> f64 {
        (0..=self.shifts.len())
            .map(|i| self.phase(i).peak_rate())
            .fold(0.0, f64::max)
    }
}

/// Intensity of the arrival process at time `t`.
pub fn rate_at(spec: &WorkloadSpec, t: SimTime) -> f64 {
    let secs = t.as_secs_f64();
    spec.phase_at(secs).rate_at(secs)
}

/// Cumulative popularity table for ranks `0..key_count`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(key_count: u64, exponent: f64) -> Self {
        assert!(key_count >= 1, "key_count must be >= 1");
        let mut cdf = Vec::with_capacity(key_count as usize);
        let mut acc = 0.0;
        for r in 0..key_count {
            acc += ((r + 1) as f64).powf(-exponent);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        ZipfTable { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability of rank `r`.
    pub fn pmf(&self, r: usize) -> f64 {
        if r == 0 {
            self.cdf[0]
        } else {
            self.cdf[r] - self.cdf[r - 1]
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        let u = rng.unit();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64
    }
}

/// Draws a popularity rank in `[0, key_count)` with probability ∝ `1/(r+1)^s`.
///
/// Builds the table on every call; hot loops should hold a [`ZipfTable`].
pub fn zipf_sample(spec: &WorkloadSpec, rng: &mut RngStream) -> Key {
    ZipfTable::new(spec.key_count, spec.zipf_exponent).sample(rng)
}

/// Arrival instants of the nonhomogeneous Poisson process with intensity
/// [`rate_at`] over `[0, duration)`, realised by thinning.
pub fn arrival_times(spec: &WorkloadSpec, duration: SimTime, rng: &mut RngStream) -> Vec<SimTime> {
    let lambda_max = spec.peak_rate();
    let mut out = Vec::new();
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return out;
    }
    let horizon = duration.as_secs_f64();
    let mut t = 0.0;
    let mut last: Option<SimTime> = None;
    loop {
        t += rng.exponential(1.0 / lambda_max);
        if t >= horizon {
            break;
        }
        let accept = rng.unit() * lambda_max < spec.phase_at(t).rate_at(t);
        if !accept {
            continue;
        }
        let mut at = SimTime::from_secs_f64(t);
        // Keep instants strictly increasing at microsecond resolution.
        if let Some(prev) = last {
            if at <= prev {
                at = SimTime::from_micros(prev.as_micros() + 1);
            }
        }
        if at >= duration {
            break;
        }
        out.push(at);
        last = Some(at);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub key: Key,
    pub op: Op,
    pub arrival: SimTime,
}

/// The complete request stream of a run: arrival instants first, then one
/// key and operation per arrival, all from `rng`.
pub fn generate_requests(spec: &WorkloadSpec, duration: SimTime, rng: &mut RngStream) -> Vec<Request> {
    let arrivals = arrival_times(spec, duration, rng);
    let mut tables: Vec<Option<ZipfTable>> = vec![None; spec.shifts.len() + 1];
    arrivals
        .into_iter()
        .map(|arrival| {
            let idx = spec.phase_index_at(arrival.as_secs_f64());
            let phase = spec.phase(idx);
            let table = tables[idx]
                .get_or_insert_with(|| ZipfTable::new(spec.key_count, phase.key_exponent()));
            let rank = table.sample(rng);
            let key = (rank + phase.hot_offset % spec.key_count) % spec.key_count;
            let op = if rng.unit() < phase.read_ratio {
                Op::Read
            } else {
                Op::Write
            };
            Request { key, op, arrival }
        })
        .collect()
}
