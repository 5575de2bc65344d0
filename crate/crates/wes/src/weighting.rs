//! The WES weighting curve.
//!
//! The label's probability density `f(x)` is estimated with a histogram,
//! approximated by a least-squares polynomial `f̂(x)`, and flipped and
//! rescaled into the weighting curve
//!
//! ```text
//! g(x) = (β − c)·(1 − f̂(x)/f_max) + c
//! ```
//!
//! so that `g = c` where the density peaks and `g → β` where it vanishes.
//! `c` is the reciprocal of the label range (1 after normalization) and `β`
//! is the stretch hyperparameter — the maximum weight a vanishing-density
//! label can receive.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Number of evaluation points used to locate the fitted PDF's maximum.
pub const FMAX_GRID: usize = 10_001;

/// Histogram estimate of the label density on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PdfEstimate {
    /// Centers of the equal-width bins.
    pub bin_centers: Vec<f64>,
    /// Density per bin; `Σ densities·bin_width = 1`.
    pub densities: Vec<f64>,
    pub bin_width: f64,
}

/// The fitted weighting curve.
#[derive(Debug, Clone)]
pub struct WeightingCurve {
    /// Polynomial coefficients of `f̂`, lowest power first.
    pub poly_coeffs: Vec<f64>,
    /// Maximum of the clamped fitted PDF over `[0, 1]`.
    pub f_max: f64,
    /// Stretch hyperparameter β (upper weight bound).
    pub beta: f64,
    /// Lower weight bound: 1/(label range); 1 for normalized labels.
    pub c: f64,
    /// x at which the clamped fit attains `f_max` (grid argmax).
    pub argmax_x: f64,
}

/// Histogram the labels on `[0, 1]` with `bins` equal bins, normalized to
/// unit integral. The rightmost bin is closed so a label of exactly 1 counts.
pub fn empirical_pdf(labels: &[f64], bins: usize) -> Result<PdfEstimate> {
    if labels.is_empty() {
        return Err(Error::Config("cannot estimate a PDF from no labels".into()));
    }
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    let width = 1.0 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &y in labels {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!(
                "label {y} outside [0, 1]; normalize before estimating the PDF"
            )));
        }
        let idx = ((y / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = labels.len() as f64;
    let densities: Vec<f64> = counts.iter().map(|&cnt| cnt as f64 / (n * width)).collect();
    let bin_centers = (0..bins).map(|i| (i as f64 + 0.5) * width).collect();
    Ok(PdfEstimate {
        bin_centers,
        densities,
        bin_width: width,
    })
}

impl PdfEstimate {
    /// The histogram's own integral; 1 up to round-off by construction.
    pub fn integral(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.bin_width
    }
}

/// Ordinary least-squares polynomial fit of densities against bin centers.
///
/// Solved through the SVD of the Vandermonde matrix, which tolerates the
/// ill-conditioning of high-degree monomial bases. Returns the coefficients
/// (lowest power first) and the RMS residual at the bin centers.
pub fn fit_pdf_polynomial(pdf: &PdfEstimate, degree: usize) -> Result<(Vec<f64>, f64)> {
    if degree < 1 {
        return Err(Error::Config("polynomial degree must be at least 1".into()));
    }
    let bins = pdf.bin_centers.len();
    if bins <= degree {
        return Err(Error::Config(format!(
            "degree-{degree} fit needs more than {degree} bins, got {bins}"
        )));
    }
    let cols = degree + 1;
    let mut design = DMatrix::zeros(bins, cols);
    for (r, &x) in pdf.bin_centers.iter().enumerate() {
        let mut pow = 1.0;
        for c in 0..cols {
            design[(r, c)] = pow;
            pow *= x;
        }
    }
    let rhs = DVector::from_column_slice(&pdf.densities);
    let svd = design.clone().svd(true, true);
    let coeffs = svd
        .solve(&rhs, f64::EPSILON * bins as f64)
        .map_err(|e| Error::Numeric(format!("polynomial fit failed: {e}")))?;

    let fitted = design * &coeffs;
    let residual = (&fitted - &rhs).norm_squared() / bins as f64;
    Ok((coeffs.iter().cloned().collect(), residual.sqrt()))
}

/// Evaluate a polynomial given lowest-first coefficients (Horner form).
fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Build the full weighting curve for one label set and one β.
///
/// `c` is computed from the raw label range; for labels already normalized
/// to `[0, 1]` it is exactly 1. Requires `β ≥ c`.
pub fn build_weighting(
    labels: &[f64],
    bins: usize,
    degree: usize,
    beta: f64,
) -> Result<WeightingCurve> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &y in labels {
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if labels.is_empty() || !(hi > lo) {
        return Err(Error::Numeric(
            "weighting needs labels with a nonzero range".into(),
        ));
    }
    let c = 1.0 / (hi - lo);
    if !(beta >= c) {
        return Err(Error::Config(format!(
            "beta must satisfy beta >= c (= {c}), got {beta}"
        )));
    }
    let pdf = empirical_pdf(labels, bins)?;
    let (poly_coeffs, _residual) = fit_pdf_polynomial(&pdf, degree)?;

    // A degree-12 polynomial may dip below zero or overshoot between bins;
    // the weighting always works with the fit clamped to [0, f_max], where
    // f_max is the grid maximum of the nonnegative part.
    let mut f_max = f64::NEG_INFINITY;
    let mut argmax_x = 0.0;
    for i in 0..FMAX_GRID {
        let x = i as f64 / (FMAX_GRID - 1) as f64;
        let f = eval_poly(&poly_coeffs, x).max(0.0);
        if f > f_max {
            f_max = f;
            argmax_x = x;
        }
    }
    if !(f_max > 0.0) {
        return Err(Error::Numeric(
            "fitted PDF is nonpositive everywhere; cannot build a weighting".into(),
        ));
    }
    Ok(WeightingCurve {
        poly_coeffs,
        f_max,
        beta,
        c,
        argmax_x,
    })
}

impl WeightingCurve {
    /// The fitted density at `x`, clamped to `[0, f_max]`.
    pub fn eval_pdf_clamped(&self, x: f64) -> f64 {
        eval_poly(&self.poly_coeffs, x).clamp(0.0, self.f_max)
    }

    /// The raw (unclamped) polynomial value at `x`.
    pub fn eval_pdf_raw(&self, x: f64) -> f64 {
        eval_poly(&self.poly_coeffs, x)
    }

    /// The weight `g(x) = (β − c)·(1 − f̂(x)/f_max) + c`, always in `[c, β]`.
    pub fn eval_weight(&self, x: f64) -> f64 {
        let f = self.eval_pdf_clamped(x);
        (self.beta - self.c) * (1.0 - f / self.f_max) + self.c
    }

    /// Precompute `g(y)` for a whole label slice.
    pub fn weights_for(&self, labels: &[f64]) -> Vec<f64> {
        labels.iter().map(|&y| self.eval_weight(y)).collect()
    }
}
