//! Evaluation metrics: RMSE, Pearson correlation, PDF overlap area,
//! extreme-region RMSE, and tail means.
//!
//! Two conventions matter throughout and are easy to get subtly wrong:
//!
//! * Tail membership is decided by the **label**, never the prediction.
//!   Conditioning on labels keeps the evaluated sample set identical across
//!   losses, so tail means measure how far each model stretches on the same
//!   points.
//! * Predictions are **never clipped** to `[0, 1]`. A prediction outside the
//!   label range is evidence of stretching and must survive into the tail
//!   means.

use crate::{Error, Result};
use serde::Serialize;

/// Tail probability defining the extreme region (`l1` = 5% quantile,
/// `l2` = 95% quantile of the labels).
pub const EXTREME_TAIL_PROB: f64 = 0.05;
/// Percentile for the P1/P99 tail means.
pub const TAIL_PERCENTILE: f64 = 0.01;
/// Default histogram resolution for the overlap estimator.
pub const DEFAULT_OVERLAP_BINS: usize = 100;

/// Which end of the label distribution a tail mean covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    Left,
    Right,
}

/// The full per-run metric record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub cc: f64,
    pub overlap: f64,
    pub extreme_rmse: f64,
    pub l1: f64,
    pub l2: f64,
    pub p1_tail_mean: f64,
    pub p99_tail_mean: f64,
}

fn check_pair(preds: &[f64], labels: &[f64]) -> Result<()> {
    if preds.is_empty() || labels.is_empty() {
        return Err(Error::Shape("metric inputs must be nonempty".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Root-mean-square error: `√((1/N)·Σ(ŷ−y)²)`.
pub fn rmse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels)?;
    let n = preds.len() as f64;
    let ss: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((ss / n).sqrt())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_cc(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels)?;
    let n = preds.len() as f64;
    let mean_p = preds.iter().sum::<f64>() / n;
    let mean_y = labels.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_y = 0.0;
    for (p, y) in preds.iter().zip(labels) {
        let dp = p - mean_p;
        let dy = y - mean_y;
        cov += dp * dy;
        var_p += dp * dp;
        var_y += dy * dy;
    }
    if var_p == 0.0 || var_y == 0.0 {
        return Err(Error::Numeric(
            "correlation is undefined for a zero-variance sequence".into(),
        ));
    }
    Ok(cov / (var_p * var_y).sqrt())
}

/// Histogram-intersection overlap of two sample densities.
///
/// Both histograms share the range `[min(A∪B), max(A∪B)]` split into `bins`
/// equal cells (the rightmost cell closed above); each is normalized to unit
/// integral and the overlap is `Σ min(p_i, q_i)·Δ ∈ [0, 1]`.
///
/// The cell width cancels in that sum (`min(cᵃ/(nₐΔ), cᵇ/(n_bΔ))·Δ =
/// min(cᵃ·n_b, cᵇ·nₐ)/(nₐ·n_b)`), so the intersection is accumulated in
/// integer count space and rounded once at the end. Identical samples yield
/// exactly 1.0 and disjoint supports exactly 0.0.
pub fn overlap_area(sample_a: &[f64], sample_b: &[f64], bins: usize) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::Shape("overlap requires two nonempty samples".into()));
    }
    if bins == 0 {
        return Err(Error::Config("overlap bin count must be at least 1".into()));
    }
    for &v in sample_a.iter().chain(sample_b) {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite value {v} in overlap sample"
            )));
        }
    }
    let lo = sample_a
        .iter()
        .chain(sample_b)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = sample_a
        .iter()
        .chain(sample_b)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        // A degenerate shared range means every value in both samples
        // coincides, so the densities are identical point masses.
        return Ok(1.0);
    }
    let width = (hi - lo) / bins as f64;
    let histogram = |sample: &[f64]| -> Vec<u64> {
        let mut counts = vec![0u64; bins];
        for &v in sample {
            let mut idx = ((v - lo) / width) as usize;
            if idx >= bins {
                idx = bins - 1; // close the rightmost cell
            }
            counts[idx] += 1;
        }
        counts
    };
    let ca = histogram(sample_a);
    let cb = histogram(sample_b);
    let (na, nb) = (sample_a.len() as u128, sample_b.len() as u128);
    let shared: u128 = ca
        .iter()
        .zip(&cb)
        .map(|(&a, &b)| (a as u128 * nb).min(b as u128 * na))
        .sum();
    // Exact for realistic sizes; the min guards the one-ulp case where
    // na·nb exceeds 2^53 and numerator/denominator round differently.
    Ok((shared as f64 / (na * nb) as f64).min(1.0))
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `h = (n−1)·p`).
pub fn quantile_linear(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Shape("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "quantile probability must lie in [0, 1], got {p}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// The extreme-region boundaries: `l1` at the `tail_prob` label quantile and
/// `l2` at `1 − tail_prob`.
pub fn extreme_thresholds(labels: &[f64], tail_prob: f64) -> Result<(f64, f64)> {
    if !(tail_prob > 0.0 && tail_prob < 0.5) {
        return Err(Error::Domain(format!(
            "tail probability must lie in (0, 0.5), got {tail_prob}"
        )));
    }
    let l1 = quantile_linear(labels, tail_prob)?;
    let l2 = quantile_linear(labels, 1.0 - tail_prob)?;
    Ok((l1, l2))
}

/// RMSE restricted to samples whose label falls in `[0, l1] ∪ [l2, 1]`
/// (both boundaries inclusive).
pub fn extreme_rmse(preds: &[f64], labels: &[f64], l1: f64, l2: f64) -> Result<f64> {
    check_pair(preds, labels)?;
    let mut ss = 0.0;
    let mut n = 0usize;
    for (p, y) in preds.iter().zip(labels) {
        if *y <= l1 || *y >= l2 {
            let e = p - y;
            ss += e * e;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Domain(format!(
            "no labels in the extreme region [0, {l1}] ∪ [{l2}, 1]"
        )));
    }
    Ok((ss / n as f64).sqrt())
}

/// Mean prediction over the left or right label tail.
///
/// Left: samples with label ≤ the `percentile` label-quantile.
/// Right: samples with label ≥ the `1 − percentile` quantile.
pub fn tail_mean(preds: &[f64], labels: &[f64], percentile: f64, side: TailSide) -> Result<f64> {
    check_pair(preds, labels)?;
    if !(percentile > 0.0 && percentile < 0.5) {
        return Err(Error::Domain(format!(
            "tail percentile must lie in (0, 0.5), got {percentile}"
        )));
    }
    let (threshold, keep): (f64, fn(f64, f64) -> bool) = match side {
        TailSide::Left => (quantile_linear(labels, percentile)?, |y, t| y <= t),
        TailSide::Right => (quantile_linear(labels, 1.0 - percentile)?, |y, t| y >= t),
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, y) in preds.iter().zip(labels) {
        if keep(*y, threshold) {
            sum += p;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Domain("empty label tail".into()));
    }
    Ok(sum / n as f64)
}

/// Compute every metric for one prediction run.
pub fn full_report(preds: &[f64], labels: &[f64], overlap_bins: usize) -> Result<MetricReport> {
    let (l1, l2) = extreme_thresholds(labels, EXTREME_TAIL_PROB)?;
    Ok(MetricReport {
        rmse: rmse(preds, labels)?,
        cc: pearson_cc(preds, labels)?,
        overlap: overlap_area(preds, labels, overlap_bins)?,
        extreme_rmse: extreme_rmse(preds, labels, l1, l2)?,
        l1,
        l2,
        p1_tail_mean: tail_mean(preds, labels, TAIL_PERCENTILE, TailSide::Left)?,
        p99_tail_mean: tail_mean(preds, labels, TAIL_PERCENTILE, TailSide::Right)?,
    })
}
