//! Box-counting dimension of a node's keys in the unit hash interval, and the
//! shard size budget derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalEstimate {
    /// Clamped to `[0, 1.1]`.
    pub dimension: f64,
    /// Box sizes used, largest first.
    pub scales: Vec<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

const MAX_DIMENSION: f64 = 1.1;

/// Box sizes `2^-1 ..= 2^-k`, largest first.
pub fn dyadic_scales(k: u32) -> Vec<f64> {
    (1..=k.min(52)).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Box-counting dimension of `points` (each in `[0, 1)`): the least-squares
/// slope of `ln N(ε)` against `ln(1/ε)`, where `N(ε)` counts the occupied
/// boxes `[iε, (i+1)ε)`.
pub fn fractal_dimension(points: &[f64], scales: &[f64]) -> Result<FractalEstimate> {
    let usable = scales.iter().filter(|e| e.is_finite() && **e > 0.0 && **e <= 1.0).count();
    if points.len() < 2 || scales.len() < 3 || usable != scales.len() {
        return Err(Error::DegenerateInput);
    }
    let mut xs = Vec::with_capacity(scales.len());
    let mut ys = Vec::with_capacity(scales.len());
    let mut boxes: Vec<u64> = Vec::with_capacity(points.len());
    for &eps in scales {
        let last = ((1.0 / eps).ceil() as u64).saturating_sub(1);
        boxes.clear();
        boxes.extend(points.iter().map(|&p| ((p.clamp(0.0, 1.0) / eps) as u64).min(last)));
        boxes.sort_unstable();
        boxes.dedup();
        xs.push(-eps.ln());
        ys.push((boxes.len() as f64).ln());
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(FractalEstimate {
        dimension: slope.clamp(0.0, MAX_DIMENSION),
        scales: scales.to_vec(),
        residual,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Record budget for a shard on a node of dimension `dimension`:
/// `base · (0.5 + D/2)`, rounded half up. Concentrated key sets get smaller
/// shards so hot spots split sooner.
pub fn target_shard_size(dimension: f64, base: u64) -> u64 {
    let d = dimension.clamp(0.0, MAX_DIMENSION);
    (base as f64 * (0.5 + d / 2.0) + 0.5).floor() as u64
}
