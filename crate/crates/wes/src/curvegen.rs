//! Synthetic label-curve generation.
//!
//! A *basis curve* samples the inverse CDF (quantile function) of one of four
//! distributions on a midpoint probability grid. The *label curve* is the
//! basis followed by its mirror image (a "bisymmetric pair"), tiled a number
//! of times, then affinely normalized so its minimum is exactly 0 and its
//! maximum exactly 1. The default configuration produces 40,000 samples:
//! a 2,000-point basis × 2 (mirror) × 10 pair repeats.

use crate::{Error, Result};

/// The four label-value distributions of the benchmark.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Quantile function of N(0, 1).
    Unimodal,
    /// Quantile function of ln N(0, 1) (lognormal, σ = 1).
    SkewedUnimodal,
    /// Concatenated quantile functions of N(0, 1) and N(0, 1/4)
    /// (variance 1/4, i.e. sd = 1/2).
    Bimodal,
    /// Concatenated quantile functions of ln N(0, 1) and ln N(0, 1/4).
    SkewedBimodal,
}

impl DistributionKind {
    /// All four kinds in canonical order.
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::Unimodal,
        DistributionKind::SkewedUnimodal,
        DistributionKind::Bimodal,
        DistributionKind::SkewedBimodal,
    ];

    /// Canonical lowercase name, used in CLI arguments, config files, and
    /// result records.
    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Unimodal => "unimodal",
            DistributionKind::SkewedUnimodal => "skewed-unimodal",
            DistributionKind::Bimodal => "bimodal",
            DistributionKind::SkewedBimodal => "skewed-bimodal",
        }
    }

    /// True for the two concatenated (two-component) kinds.
    pub fn is_bimodal(self) -> bool {
        matches!(
            self,
            DistributionKind::Bimodal | DistributionKind::SkewedBimodal
        )
    }
}

impl std::fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unimodal" | "uni" => Ok(DistributionKind::Unimodal),
            "skewed-unimodal" | "skewed_unimodal" | "suni" => Ok(DistributionKind::SkewedUnimodal),
            "bimodal" | "bi" => Ok(DistributionKind::Bimodal),
            "skewed-bimodal" | "skewed_bimodal" | "sbi" => Ok(DistributionKind::SkewedBimodal),
            other => Err(Error::Config(format!(
                "unknown distribution {other:?}; expected one of unimodal, \
                 skewed-unimodal, bimodal, skewed-bimodal"
            ))),
        }
    }
}

/// Inverse-CDF samples for one distribution kind, before mirroring and
/// normalization.
#[derive(Debug, Clone)]
pub struct BasisCurve {
    pub values: Vec<f64>,
    pub kind: DistributionKind,
}

/// The final training target: mirrored, tiled, normalized to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LabelCurve {
    /// Sample values, all within `[0, 1]` with exact 0/1 extrema.
    pub values: Vec<f64>,
    pub kind: DistributionKind,
    /// Extent `M` of the time axis; samples sit at `t_j = j·M/T`.
    pub domain_length: f64,
}

impl LabelCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time coordinate of sample `j`: a uniform, left-aligned grid that
    /// excludes `t = M` (the curve is periodic, so `t = M` would duplicate
    /// `t = 0`).
    pub fn time_at(&self, j: usize) -> f64 {
        j as f64 * self.domain_length / self.len() as f64
    }

    /// The whole time grid.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time_at(j)).collect()
    }
}

/// Coefficients for Acklam's rational approximation of the standard normal
/// quantile function (relative error < 1.15e-9 over the full open interval).
/// The result is then polished with one Newton step against a high-accuracy
/// CDF, which brings the absolute error to the order of double-precision
/// round-off.
// The published coefficients are kept digit-for-digit even where they exceed
// f64 resolution.
#[allow(clippy::excessive_precision)]
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Central region boundary for the Acklam approximation.
const ACKLAM_P_LOW: f64 = 0.02425;

fn acklam_raw(p: f64) -> f64 {
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - ACKLAM_P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}

/// Standard normal density.
fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via the Taylor-series expansion
/// `Φ(x) = 1/2 + φ(x)·(x + x³/3 + x⁵/(3·5) + x⁷/(3·5·7) + …)`.
///
/// All terms share the sign of `x`, so the sum has no cancellation; absolute
/// error is at round-off level for `|x| ≲ 8`, which comfortably covers every
/// probability this crate ever evaluates. Far outside that range the result
/// saturates at 0/1, which is exact to double precision anyway.
pub fn normal_cdf(x: f64) -> f64 {
    if x < -40.0 {
        return 0.0;
    }
    if x > 40.0 {
        return 1.0;
    }
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    let mut k = 1u32;
    while term.abs() > 1e-22 * sum.abs().max(1.0) && k < 500 {
        term *= x2 / (2 * k + 1) as f64;
        sum += term;
        k += 1;
    }
    let phi = 0.5 + normal_pdf(x) * sum;
    phi.clamp(0.0, 1.0)
}

/// Quantile function of N(mean, sd²).
///
/// Acklam's rational approximation polished by one Newton step
/// (`x ← x − (Φ(x) − p)/φ(x)`); the refined result satisfies
/// `|Φ(x) − p| < 1e-9` with large margin across the open interval.
pub fn inverse_normal_cdf(p: f64, mean: f64, sd: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "probability must lie strictly inside (0, 1), got {p}"
        )));
    }
    if !(sd > 0.0) {
        return Err(Error::Domain(format!(
            "standard deviation must be positive, got {sd}"
        )));
    }
    let x = acklam_raw(p);
    let err = normal_cdf(x) - p;
    let x = x - err / normal_pdf(x);
    Ok(mean + sd * x)
}

/// Quantile function of the lognormal distribution `ln N(mu, sd²)`:
/// `exp` of the corresponding normal quantile. Always strictly positive.
pub fn inverse_lognormal_cdf(p: f64, mu: f64, sd: f64) -> Result<f64> {
    Ok(inverse_normal_cdf(p, mu, sd)?.exp())
}

/// Midpoint probability grid `p_j = (j + 1/2)/n`, which avoids the ±∞
/// quantiles at 0 and 1.
fn midpoint_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| (j as f64 + 0.5) / n as f64)
}

/// Sample the inverse CDF of `kind` on the midpoint grid.
///
/// Unimodal kinds use a single quantile function over `n_points`. Bimodal
/// kinds concatenate two equal halves — the sd = 1 component first, then the
/// sd = 1/2 (variance 1/4) component — each sampled on its own midpoint grid
/// of `n_points/2`.
pub fn generate_basis(kind: DistributionKind, n_points: usize) -> Result<BasisCurve> {
    if n_points < 2 {
        return Err(Error::Config(format!(
            "basis needs at least 2 points, got {n_points}"
        )));
    }
    if kind.is_bimodal() && !n_points.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "bimodal basis needs an even point count, got {n_points}"
        )));
    }
    let values = match kind {
        DistributionKind::Unimodal => midpoint_grid(n_points)
            .map(|p| inverse_normal_cdf(p, 0.0, 1.0))
            .collect::<Result<Vec<_>>>()?,
        DistributionKind::SkewedUnimodal => midpoint_grid(n_points)
            .map(|p| inverse_lognormal_cdf(p, 0.0, 1.0))
            .collect::<Result<Vec<_>>>()?,
        DistributionKind::Bimodal => {
            let half = n_points / 2;
            let mut v: Vec<f64> = midpoint_grid(half)
                .map(|p| inverse_normal_cdf(p, 0.0, 1.0))
                .collect::<Result<Vec<_>>>()?;
            v.extend(
                midpoint_grid(half)
                    .map(|p| inverse_normal_cdf(p, 0.0, 0.5))
                    .collect::<Result<Vec<_>>>()?,
            );
            v
        }
        DistributionKind::SkewedBimodal => {
            let half = n_points / 2;
            let mut v: Vec<f64> = midpoint_grid(half)
                .map(|p| inverse_lognormal_cdf(p, 0.0, 1.0))
                .collect::<Result<Vec<_>>>()?;
            v.extend(
                midpoint_grid(half)
                    .map(|p| inverse_lognormal_cdf(p, 0.0, 0.5))
                    .collect::<Result<Vec<_>>>()?,
            );
            v
        }
    };
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(BasisCurve { values, kind })
}

/// Affine map onto `[0, 1]`: `x ↦ (x − min)/(max − min)`.
///
/// The extrema map to exactly 0 and 1: `min − min` is exactly 0, and
/// `(max − min)/(max − min)` is exactly 1 in IEEE arithmetic.
pub fn uniform_normalize(series: &[f64]) -> Result<Vec<f64>> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in series {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if series.is_empty() || !(hi > lo) {
        return Err(Error::Numeric(
            "cannot normalize a constant or empty series (zero range)".into(),
        ));
    }
    let range = hi - lo;
    Ok(series.iter().map(|&v| (v - lo) / range).collect())
}

/// Assemble the label curve: `[basis, reverse(basis)]` tiled `pair_repeats`
/// times, then normalized to `[0, 1]`.
///
/// The mirror makes each tile palindromic, so consecutive tiles join without
/// a jump and the tiled curve is periodic with period `2·n_points` samples.
pub fn build_label_curve(
    basis: &BasisCurve,
    pair_repeats: usize,
    domain_length: f64,
) -> Result<LabelCurve> {
    if pair_repeats < 1 {
        return Err(Error::Config("pair_repeats must be at least 1".into()));
    }
    if !(domain_length > 0.0) {
        return Err(Error::Config(format!(
            "domain_length must be positive, got {domain_length}"
        )));
    }
    let n = basis.values.len();
    let mut pair = Vec::with_capacity(2 * n);
    pair.extend_from_slice(&basis.values);
    pair.extend(basis.values.iter().rev());
    let mut curve = Vec::with_capacity(2 * n * pair_repeats);
    for _ in 0..pair_repeats {
        curve.extend_from_slice(&pair);
    }
    let values = uniform_normalize(&curve)?;
    Ok(LabelCurve {
        values,
        kind: basis.kind,
        domain_length,
    })
}

/// Convenience constructor: basis + mirror + tile + normalize with one call.
pub fn default_label_curve(kind: DistributionKind) -> Result<LabelCurve> {
    let basis = generate_basis(kind, 2000)?;
    build_label_curve(&basis, 10, 10.0)
}
