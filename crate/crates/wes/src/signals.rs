//! Fourier cosine analysis of the label curve and input-feature synthesis.
//!
//! The label curve is expanded in a cosine series
//! `L(t) ≈ a_0 + Σ_{i=1..K} a_i·cos(iπt/M)`; the `N` harmonics with the
//! largest  `|a_i|` become the network's input signals
//! `h_k(t) = cos(n_k·π·t/M)`, optionally perturbed with i.i.d. Gaussian
//! noise per matrix entry.

use crate::curvegen::LabelCurve;
use crate::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Cosine-series coefficients of a label curve.
#[derive(Debug, Clone)]
pub struct CosineSpectrum {
    /// Mean term `a_0`.
    pub a0: f64,
    /// Harmonic coefficients `a_1..a_K` (index 0 holds `a_1`).
    pub coefficients: Vec<f64>,
    /// Time-axis extent `M` of the analyzed curve.
    pub domain_length: f64,
}

impl CosineSpectrum {
    /// Number of harmonics `K`.
    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficient `a_i` for harmonic index `i ≥ 1`.
    pub fn coefficient(&self, i: usize) -> f64 {
        self.coefficients[i - 1]
    }
}

/// The selected input harmonics, ordered by descending `|a|`.
#[derive(Debug, Clone)]
pub struct HarmonicSet {
    /// Harmonic indices `n_1..n_N` (all ≥ 1; `a_0` is never selected).
    pub indices: Vec<usize>,
    /// Matching coefficients `a_{n_k}`.
    pub coefficients: Vec<f64>,
    /// Time-axis extent the harmonics refer to.
    pub domain_length: f64,
}

impl HarmonicSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Input-feature matrix: one row per time sample, one column per harmonic.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    /// `T × N` matrix of feature values.
    pub data: Array2<f64>,
    /// Standard deviation of the additive Gaussian noise (0 = noiseless).
    pub sigma: f64,
    /// Seed of the noise generator (ignored when `sigma` = 0).
    pub seed: u64,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }
}

/// Number of cosine terms in the analysis spectrum (`K`).
pub const DEFAULT_SPECTRUM_TERMS: usize = 300;
/// Number of dominant harmonics kept as network inputs (`N`).
pub const DEFAULT_FEATURE_COUNT: usize = 5;

/// Compute the cosine spectrum of a label curve by composite trapezoidal
/// integration on its uniform grid.
///
/// The curve samples cover `t ∈ [0, M)`; the trapezoid rule needs the closing
/// point at `t = M`, which by periodicity equals the first sample. With that
/// closing point, `a_0` reduces to the plain sample mean.
pub fn cosine_coefficients(curve: &LabelCurve, k: usize) -> Result<CosineSpectrum> {
    if k < 1 {
        return Err(Error::Config("need at least one harmonic".into()));
    }
    let t_len = curve.len();
    if t_len < 2 * k {
        return Err(Error::Config(format!(
            "{k} harmonics need at least {} samples, curve has {t_len}",
            2 * k
        )));
    }
    let m = curve.domain_length;
    let dt = m / t_len as f64;
    let vals = &curve.values;

    // a_0 = (1/M)·∫ L dt. With the periodic closing point v[T] = v[0], the
    // trapezoid weights (1/2, 1, …, 1, 1/2) collapse to a plain sum.
    let a0 = vals.iter().sum::<f64>() * dt / m;

    let mut coefficients = Vec::with_capacity(k);
    for i in 1..=k {
        let w = i as f64 * std::f64::consts::PI / m;
        // Interior samples j = 1..T-1 carry weight 1; the endpoints t = 0 and
        // t = M (value v[0] at both) carry weight 1/2 each.
        let mut acc = 0.5 * vals[0] * (0.0f64).cos();
        for (j, &v) in vals.iter().enumerate().skip(1) {
            acc += v * (w * (j as f64 * dt)).cos();
        }
        acc += 0.5 * vals[0] * (w * m).cos();
        coefficients.push(2.0 / m * acc * dt);
    }
    Ok(CosineSpectrum {
        a0,
        coefficients,
        domain_length: m,
    })
}

/// Pick the `n` harmonics with the largest `|a_i|` (ties broken toward the
/// smaller index), returned in descending-magnitude order.
pub fn select_harmonics(spectrum: &CosineSpectrum, n: usize) -> Result<HarmonicSet> {
    if n < 1 || n > spectrum.k() {
        return Err(Error::Config(format!(
            "harmonic count {n} outside 1..={}",
            spectrum.k()
        )));
    }
    let mut order: Vec<usize> = (1..=spectrum.k()).collect();
    // Descending magnitude; equal magnitudes fall back to ascending index.
    order.sort_by(|&a, &b| {
        let (ma, mb) = (spectrum.coefficient(a).abs(), spectrum.coefficient(b).abs());
        mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
    });
    let indices: Vec<usize> = order.into_iter().take(n).collect();
    let coefficients = indices.iter().map(|&i| spectrum.coefficient(i)).collect();
    Ok(HarmonicSet {
        indices,
        coefficients,
        domain_length: spectrum.domain_length,
    })
}

/// Evaluate the noiseless feature matrix `h_k(t_j) = cos(n_k·π·t_j/M)` on an
/// explicit time grid.
pub fn synthesize_features(harmonics: &HarmonicSet, grid: &[f64], m: f64) -> Result<FeatureMatrix> {
    if grid.is_empty() {
        return Err(Error::Config("time grid must be nonempty".into()));
    }
    if harmonics.is_empty() {
        return Err(Error::Config("harmonic set must be nonempty".into()));
    }
    let mut data = Array2::zeros((grid.len(), harmonics.len()));
    for (k, &n_k) in harmonics.indices.iter().enumerate() {
        let w = n_k as f64 * std::f64::consts::PI / m;
        for (j, &t) in grid.iter().enumerate() {
            data[(j, k)] = (w * t).cos();
        }
    }
    Ok(FeatureMatrix {
        data,
        sigma: 0.0,
        seed: 0,
    })
}

/// Deterministic per-column stream seed derived from the matrix seed.
fn column_seed(seed: u64, column: usize) -> u64 {
    crate::mix_seed(seed, column as u64 + 1)
}

/// Add i.i.d. `N(0, sigma²)` noise to every entry.
///
/// Each feature column draws from its own ChaCha8 stream derived from
/// `seed`, so generating columns in parallel (or in any order) yields the
/// same matrix as a sequential pass. `sigma = 0` returns the input unchanged.
pub fn add_noise(features: &FeatureMatrix, sigma: f64, seed: u64) -> Result<FeatureMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise standard deviation must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(features.clone());
    }
    let mut data = features.data.clone();
    let rows = data.nrows();
    for k in 0..data.ncols() {
        let mut rng = ChaCha8Rng::seed_from_u64(column_seed(seed, k));
        let mut col = data.column_mut(k);
        for j in 0..rows {
            let z: f64 = rng.sample(StandardNormal);
            col[j] += sigma * z;
        }
    }
    Ok(FeatureMatrix { data, sigma, seed })
}

/// Evaluate the full partial sum `a_0 + Σ a_i·cos(iπt/M)` on a time grid.
/// Used to validate the spectrum against the original curve.
pub fn partial_sum_reconstruction(spectrum: &CosineSpectrum, grid: &[f64]) -> Vec<f64> {
    let m = spectrum.domain_length;
    grid.iter()
        .map(|&t| {
            let mut acc = spectrum.a0;
            for (idx, &a) in spectrum.coefficients.iter().enumerate() {
                let i = (idx + 1) as f64;
                acc += a * (i * std::f64::consts::PI * t / m).cos();
            }
            acc
        })
        .collect()
}
