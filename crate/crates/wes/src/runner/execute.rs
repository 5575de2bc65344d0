//! Grid expansion and execution.
//!
//! A sweep expands its config into *cells* — one per (distribution, σ, loss,
//! member) — in canonical order, precomputes everything that is shared per
//! distribution (label curve, spectrum, harmonics, noiseless features,
//! weighting curves), then executes the cells either sequentially or on a
//! rayon pool. Each cell owns its RNG streams, so the result set is a pure
//! function of the config regardless of worker count or scheduling order.

use crate::curvegen::{default_label_curve, DistributionKind, LabelCurve};
use crate::losses::LossSpec;
use crate::metrics::{full_report, MetricReport};
use crate::network::{predict, train, TrainConfig};
use crate::runner::config::ExperimentConfig;
use crate::runner::seeds;
use crate::signals::{
    add_noise, cosine_coefficients, select_harmonics, synthesize_features, CosineSpectrum,
    FeatureMatrix, HarmonicSet, DEFAULT_FEATURE_COUNT, DEFAULT_SPECTRUM_TERMS,
};
use crate::weighting::{build_weighting, WeightingCurve};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

/// Every 20th sample of a member-0 run is kept as plot data.
pub const PRED_SAMPLE_STRIDE: usize = 20;

/// One training run of the grid.
#[derive(Debug, Clone)]
pub struct Cell {
    pub dist: DistributionKind,
    pub sigma: f64,
    pub loss: LossSpec,
    pub member: usize,
    /// Weight-init / batching seed.
    pub seed: u64,
    /// Feature-noise seed (shared across losses of one member).
    pub noise_seed: u64,
}

/// The six metric values stored per result row (the CSV metric columns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    pub rmse: f64,
    pub cc: f64,
    pub overlap: f64,
    pub extreme_rmse: f64,
    pub p1_tail_mean: f64,
    pub p99_tail_mean: f64,
}

impl From<&MetricReport> for RowMetrics {
    fn from(r: &MetricReport) -> Self {
        RowMetrics {
            rmse: r.rmse,
            cc: r.cc,
            overlap: r.overlap,
            extreme_rmse: r.extreme_rmse,
            p1_tail_mean: r.p1_tail_mean,
            p99_tail_mean: r.p99_tail_mean,
        }
    }
}

impl RowMetrics {
    /// Metric values in canonical column order.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.rmse,
            self.cc,
            self.overlap,
            self.extreme_rmse,
            self.p1_tail_mean,
            self.p99_tail_mean,
        ]
    }

    /// Canonical metric column names, matching [`RowMetrics::as_array`].
    pub const NAMES: [&'static str; 6] = [
        "rmse",
        "cc",
        "overlap",
        "extreme_rmse",
        "p1_tail_mean",
        "p99_tail_mean",
    ];
}

/// One result row: key, metrics (if the run finished), and bookkeeping.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub dist: DistributionKind,
    pub sigma: f64,
    pub loss: LossSpec,
    pub member: usize,
    pub seed: u64,
    pub metrics: Option<RowMetrics>,
    pub train_loss_final: Option<f64>,
    pub wall_seconds: f64,
    /// `"ok"`, or `"error: …"` for aborted runs (never silently dropped).
    pub status: String,
}

impl ExperimentResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Strided member-0 predictions kept for the prediction-vs-label plot data.
#[derive(Debug, Clone)]
pub struct PredSample {
    pub dist: DistributionKind,
    pub sigma: f64,
    pub loss: LossSpec,
    /// Every [`PRED_SAMPLE_STRIDE`]-th prediction.
    pub preds: Vec<f64>,
}

/// Everything produced by one sweep.
#[derive(Debug, Clone)]
pub struct ResultSet {
    pub rows: Vec<ExperimentResult>,
    pub pred_samples: Vec<PredSample>,
}

/// Per-distribution shared state, computed once per sweep.
pub struct DistAssets {
    pub curve: LabelCurve,
    pub spectrum: CosineSpectrum,
    pub harmonics: HarmonicSet,
    /// Noiseless feature matrix; per-cell noise is added on top.
    pub base_features: FeatureMatrix,
    /// Weighting curve per β (keyed by `f64::to_bits`).
    pub weightings: BTreeMap<u64, WeightingCurve>,
    /// Precomputed `g(y_j)` per β for the whole label curve.
    pub weights: BTreeMap<u64, Vec<f64>>,
}

/// Build the shared assets of one distribution: label curve, K-term cosine
/// spectrum, the N dominant harmonics, the noiseless feature matrix, and a
/// weighting curve per β that the loss list needs.
pub fn build_assets(config: &ExperimentConfig, dist: DistributionKind) -> Result<DistAssets> {
    let curve = default_label_curve(dist)?;
    let spectrum = cosine_coefficients(&curve, DEFAULT_SPECTRUM_TERMS)?;
    let harmonics = select_harmonics(&spectrum, DEFAULT_FEATURE_COUNT)?;
    let base_features = synthesize_features(&harmonics, &curve.time_grid(), curve.domain_length)?;
    let mut weightings = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for loss in config.expanded_losses()? {
        if let Some(beta) = loss.beta() {
            let key = beta.to_bits();
            if weightings.contains_key(&key) {
                continue;
            }
            let wc = build_weighting(&curve.values, config.pdf_bins, config.poly_degree, beta)?;
            weights.insert(key, wc.weights_for(&curve.values));
            weightings.insert(key, wc);
        }
    }
    Ok(DistAssets {
        curve,
        spectrum,
        harmonics,
        base_features,
        weightings,
        weights,
    })
}

/// Canonical comparison of result keys: distribution rank, then σ, then loss
/// family/parameter, then member.
pub fn compare_keys(
    a: &(DistributionKind, f64, LossSpec, usize),
    b: &(DistributionKind, f64, LossSpec, usize),
) -> std::cmp::Ordering {
    let (ka, kb) = (a.2.sort_key(), b.2.sort_key());
    a.0.cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(ka.0.cmp(&kb.0))
        .then(ka.1.total_cmp(&kb.1))
        .then(a.3.cmp(&b.3))
}

/// Expand a config into cells in canonical order and run the startup seed
/// checks.
pub fn expand_cells(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut dists = config.distributions.clone();
    dists.sort();
    let mut sigmas = config.sigmas.clone();
    sigmas.sort_by(|a, b| a.total_cmp(b));
    let mut losses = config.expanded_losses()?;
    losses.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });

    let mut cells = Vec::new();
    let mut keyed_seeds = Vec::new();
    for &dist in &dists {
        for &sigma in &sigmas {
            for loss in &losses {
                for member in 0..config.ensemble_size {
                    let seed = seeds::member_seed(config.master_seed, dist, sigma, loss, member);
                    let noise_seed = if config.fresh_noise_per_member {
                        seeds::noise_seed_fresh(config.master_seed, dist, sigma, member)
                    } else {
                        seeds::noise_seed_shared(config.master_seed, dist, sigma)
                    };
                    keyed_seeds.push((
                        seeds::member_key_string(config.master_seed, dist, sigma, loss, member),
                        seed,
                    ));
                    cells.push(Cell {
                        dist,
                        sigma,
                        loss: *loss,
                        member,
                        seed,
                        noise_seed,
                    });
                }
            }
        }
    }
    seeds::check_distinct(&keyed_seeds)?;
    Ok(cells)
}

/// Execute one cell: noise → train → predict → metrics. Failures become an
/// error-status row instead of aborting the sweep.
fn run_cell(
    config: &ExperimentConfig,
    assets: &DistAssets,
    cell: &Cell,
    keep_sample: bool,
) -> (ExperimentResult, Option<PredSample>) {
    let started = Instant::now();
    let outcome: Result<(MetricReport, f64, Vec<f64>)> = (|| {
        let features = add_noise(&assets.base_features, cell.sigma, cell.noise_seed)?;
        let weights: Option<&[f64]> = match cell.loss.beta() {
            Some(beta) => Some(
                assets
                    .weights
                    .get(&beta.to_bits())
                    .ok_or_else(|| {
                        Error::Config(format!("no weighting curve prepared for beta {beta}"))
                    })?
                    .as_slice(),
            ),
            None => None,
        };
        let train_config = TrainConfig {
            seed: cell.seed,
            ..config.train.clone()
        };
        let labels = &assets.curve.values;
        let model = train(&features, labels, &cell.loss, weights, &train_config)?;
        let preds = predict(&model, &features)?;
        let report = full_report(&preds, labels, config.overlap_bins)?;
        let final_loss = *model.train_history.last().unwrap();
        Ok((report, final_loss, preds))
    })();
    let wall_seconds = started.elapsed().as_secs_f64();

    match outcome {
        Ok((report, final_loss, preds)) => {
            let sample = keep_sample.then(|| PredSample {
                dist: cell.dist,
                sigma: cell.sigma,
                loss: cell.loss,
                preds: preds.iter().step_by(PRED_SAMPLE_STRIDE).copied().collect(),
            });
            (
                ExperimentResult {
                    dist: cell.dist,
                    sigma: cell.sigma,
                    loss: cell.loss,
                    member: cell.member,
                    seed: cell.seed,
                    metrics: Some(RowMetrics::from(&report)),
                    train_loss_final: Some(final_loss),
                    wall_seconds,
                    status: "ok".into(),
                },
                sample,
            )
        }
        Err(e) => (
            ExperimentResult {
                dist: cell.dist,
                sigma: cell.sigma,
                loss: cell.loss,
                member: cell.member,
                seed: cell.seed,
                metrics: None,
                train_loss_final: None,
                wall_seconds,
                status: format!("error: {e}"),
            },
            None,
        ),
    }
}

fn report_progress(done: &AtomicUsize, total: usize, cell: &Cell, result: &ExperimentResult) {
    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
    // WES_QUIET suppresses the per-cell lines (benchmarks, scripted runs).
    if std::env::var_os("WES_QUIET").is_some() {
        return;
    }
    eprintln!(
        "[{k}/{total}] {} sigma={} {} member={}: {} ({:.1}s)",
        cell.dist, cell.sigma, cell.loss, cell.member, result.status, result.wall_seconds
    );
}

#[cfg(feature = "parallel")]
fn execute_cells(
    config: &ExperimentConfig,
    assets: &BTreeMap<DistributionKind, DistAssets>,
    cells: &[Cell],
    workers: usize,
    min_sigma: f64,
) -> Result<Vec<(ExperimentResult, Option<PredSample>)>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build a {workers}-worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let keep = cell.member == 0 && cell.sigma == min_sigma;
                let out = run_cell(config, &assets[&cell.dist], cell, keep);
                report_progress(&done, cells.len(), cell, &out.0);
                out
            })
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn execute_cells(
    config: &ExperimentConfig,
    assets: &BTreeMap<DistributionKind, DistAssets>,
    cells: &[Cell],
    _workers: usize,
    min_sigma: f64,
) -> Result<Vec<(ExperimentResult, Option<PredSample>)>> {
    let done = AtomicUsize::new(0);
    Ok(cells
        .iter()
        .map(|cell| {
            let keep = cell.member == 0 && cell.sigma == min_sigma;
            let out = run_cell(config, &assets[&cell.dist], cell, keep);
            report_progress(&done, cells.len(), cell, &out.0);
            out
        })
        .collect())
}

/// Run the whole grid with up to `workers` concurrent cells.
///
/// The returned rows are in canonical key order and — except for
/// `wall_seconds` — are a pure function of the config; the worker count
/// changes only scheduling, never content.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ResultSet> {
    config.validate()?;
    if workers < 1 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let cells = expand_cells(config)?;
    let mut assets = BTreeMap::new();
    for cell in &cells {
        if let std::collections::btree_map::Entry::Vacant(slot) = assets.entry(cell.dist) {
            slot.insert(build_assets(config, cell.dist)?);
        }
    }
    let min_sigma = config.sigmas.iter().cloned().fold(f64::INFINITY, f64::min);

    let outputs = execute_cells(config, &assets, &cells, workers, min_sigma)?;
    let mut rows = Vec::with_capacity(outputs.len());
    let mut pred_samples = Vec::new();
    for (row, sample) in outputs {
        rows.push(row);
        pred_samples.extend(sample);
    }
    // Cells are generated in canonical order and rayon's indexed collect
    // preserves it; the sort is a cheap guarantee, not a reordering.
    rows.sort_by(|a, b| {
        compare_keys(
            &(a.dist, a.sigma, a.loss, a.member),
            &(b.dist, b.sigma, b.loss, b.member),
        )
    });
    Ok(ResultSet { rows, pred_samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            distributions: vec![DistributionKind::Unimodal],
            sigmas: vec![0.05],
            losses: vec!["mse".into()],
            ensemble_size: 2,
            train: TrainConfig {
                epochs: 1,
                holdout_fraction: 0.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn cell_cardinality_matches_the_grid() {
        let cells = expand_cells(&tiny_config()).unwrap();
        assert_eq!(cells.len(), 2, "1 dist × 1 sigma × 1 loss × 2 members");

        let mut config = tiny_config();
        config.losses = vec!["wes".into()];
        config.betas = vec![1.5, 8.0];
        let cells = expand_cells(&config).unwrap();
        assert_eq!(cells.len(), 4, "beta grid expands the wes entry");
    }

    #[test]
    fn cells_are_canonically_ordered() {
        let mut config = tiny_config();
        config.distributions = vec![
            DistributionKind::Bimodal,
            DistributionKind::Unimodal, // out of order on purpose
        ];
        config.sigmas = vec![0.05, 0.01];
        config.losses = vec!["wes".into(), "mse".into()];
        config.betas = vec![8.0, 1.5];
        let cells = expand_cells(&config).unwrap();
        for pair in cells.windows(2) {
            let ord = compare_keys(
                &(pair[0].dist, pair[0].sigma, pair[0].loss, pair[0].member),
                &(pair[1].dist, pair[1].sigma, pair[1].loss, pair[1].member),
            );
            assert_eq!(ord, std::cmp::Ordering::Less, "cells must strictly ascend");
        }
        assert_eq!(cells[0].dist, DistributionKind::Unimodal);
        assert_eq!(cells[0].sigma, 0.01);
        assert_eq!(cells[0].loss, LossSpec::Mse);
    }

    #[test]
    fn grid_run_is_deterministic_apart_from_wall_time() {
        let config = tiny_config();
        let a = run_experiment(&config, 1).unwrap();
        let b = run_experiment(&config, 1).unwrap();
        assert_eq!(a.rows.len(), 2);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.seed, rb.seed);
            assert_eq!(ra.status, rb.status);
            assert_eq!(
                ra.metrics.as_ref().map(|m| m.as_array()),
                rb.metrics.as_ref().map(|m| m.as_array())
            );
            assert_eq!(ra.train_loss_final, rb.train_loss_final);
        }
        // Member-0 sample of the single sigma is kept, strided.
        assert_eq!(a.pred_samples.len(), 1);
        assert_eq!(a.pred_samples[0].preds.len(), 40_000 / PRED_SAMPLE_STRIDE);
    }

    #[test]
    fn shared_noise_mode_reuses_one_dataset_per_member_set() {
        let mut config = tiny_config();
        config.fresh_noise_per_member = false;
        let cells = expand_cells(&config).unwrap();
        assert_eq!(cells[0].noise_seed, cells[1].noise_seed);

        config.fresh_noise_per_member = true;
        let cells = expand_cells(&config).unwrap();
        assert_ne!(cells[0].noise_seed, cells[1].noise_seed);
    }

    #[test]
    fn fresh_noise_is_paired_across_losses() {
        let mut config = tiny_config();
        config.losses = vec!["mse".into(), "mae".into()];
        let cells = expand_cells(&config).unwrap();
        // member 0 of mse and member 0 of mae share the dataset...
        let mse0 = cells
            .iter()
            .find(|c| c.loss == LossSpec::Mse && c.member == 0)
            .unwrap();
        let mae0 = cells
            .iter()
            .find(|c| c.loss == LossSpec::Mae && c.member == 0)
            .unwrap();
        assert_eq!(mse0.noise_seed, mae0.noise_seed);
        assert_ne!(mse0.seed, mae0.seed, "training seeds still differ");
    }

    #[test]
    fn assets_cover_every_beta() {
        let mut config = tiny_config();
        config.losses = vec!["wes".into()];
        config.betas = vec![1.5, 8.0, 30.0];
        let assets = build_assets(&config, DistributionKind::Unimodal).unwrap();
        assert_eq!(assets.weightings.len(), 3);
        assert_eq!(assets.weights.len(), 3);
        assert_eq!(assets.base_features.n_samples(), 40_000);
        assert_eq!(assets.base_features.n_features(), 5);
        for w in assets.weights.values() {
            assert_eq!(w.len(), 40_000);
        }
    }
}
