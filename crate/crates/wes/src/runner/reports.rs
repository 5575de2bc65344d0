//! Result aggregation and artifact files.
//!
//! A sweep leaves behind one directory containing:
//!
//! * `config.echo.toml` — the effective configuration (valid TOML; the
//!   header comments double as provenance).
//! * `results.csv` — every member row, canonical order, full precision.
//! * `summary.csv` — per-(distribution, σ, loss) mean/sd/best over members,
//!   plus one `wes:best` row per (distribution, σ) with per-metric argbest β.
//! * `table2.csv` — the tail-mean columns in long form.
//! * `fig3.tsv` — metric-vs-σ series per loss (long form).
//! * `fig1_weighting_<dist>.tsv` — (x, f̂(x), g(x; β)) tables.
//! * `predictions_<dist>.tsv` — strided member-0 predictions at the lowest σ.
//! * `fig4_scatter_<dist>.tsv`, `fig4_hist_<dist>.tsv` — prediction-vs-label
//!   plot data derived from the predictions tables.
//!
//! Every artifact starts with `# tool_version=…`, `# config_hash=…`, and
//! `# prng=…` comment lines. No artifact contains wall-clock timestamps; the
//! only timing signal is the `wall_seconds` column of `results.csv`, which is
//! exempt from the bitwise-determinism guarantee.

use crate::columnar::{fmt_f64, TsvTable};
use crate::curvegen::{default_label_curve, DistributionKind};
use crate::losses::LossSpec;
use crate::runner::config::ExperimentConfig;
use crate::runner::execute::{ExperimentResult, PredSample, RowMetrics, PRED_SAMPLE_STRIDE};
use crate::runner::seeds::loss_columns;
use crate::weighting::build_weighting;
use crate::{Error, Result, PRNG_ID, TOOL_VERSION};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Whether "better" means larger, per metric column of
/// [`RowMetrics::as_array`]: rmse ↓, cc ↑, overlap ↑, extreme_rmse ↓,
/// p1_tail_mean ↓ (deeper stretch into the left tail), p99_tail_mean ↑.
pub const MAXIMIZE: [bool; 6] = [false, true, true, false, false, true];

/// Mean, sample standard deviation, and best member value of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub sd: f64,
    pub best: f64,
}

/// Aggregated statistics of one (distribution, σ, loss) group.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub dist: DistributionKind,
    pub sigma: f64,
    pub loss: LossSpec,
    /// Members that finished; `stats` is `None` when every member failed.
    pub n: usize,
    pub stats: Option<[MetricStats; 6]>,
}

/// The per-(distribution, σ) best-β digest over all WES groups.
#[derive(Debug, Clone)]
pub struct WesBestRow {
    pub dist: DistributionKind,
    pub sigma: f64,
    /// Total finished WES members across all β.
    pub n: usize,
    /// Per metric: mean/sd of the argbest-β group; best over every member.
    pub stats: [MetricStats; 6],
    /// The β whose group mean is best, per metric (ties → smallest β).
    pub best_beta: [f64; 6],
}

/// Map a float to bits whose unsigned order matches `total_cmp`.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    dist: DistributionKind,
    sigma: u64,
    loss_rank: u8,
    loss_param: u64,
}

struct GroupData {
    sigma: f64,
    loss: LossSpec,
    member_metrics: Vec<[f64; 6]>,
}

fn stats_of(values: &[f64], maximize: bool) -> MetricStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0 // single member: sd = 0 by convention
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let best = values
        .iter()
        .cloned()
        .reduce(|a, b| if maximize { a.max(b) } else { a.min(b) })
        .unwrap();
    MetricStats { mean, sd, best }
}

/// Group member rows and compute per-group statistics plus the WES best-β
/// digests. Error-status members count toward nothing but keep their group
/// visible (a row with `n = 0`).
pub fn aggregate(rows: &[ExperimentResult]) -> (Vec<SummaryRow>, Vec<WesBestRow>) {
    let mut groups: BTreeMap<GroupKey, GroupData> = BTreeMap::new();
    for row in rows {
        let (rank, param) = row.loss.sort_key();
        let key = GroupKey {
            dist: row.dist,
            sigma: ordered_bits(row.sigma),
            loss_rank: rank,
            loss_param: ordered_bits(param),
        };
        let data = groups.entry(key).or_insert_with(|| GroupData {
            sigma: row.sigma,
            loss: row.loss,
            member_metrics: Vec::new(),
        });
        if let Some(m) = &row.metrics {
            data.member_metrics.push(m.as_array());
        }
    }

    let mut summary = Vec::with_capacity(groups.len());
    for (key, data) in &groups {
        let n = data.member_metrics.len();
        let stats = (n > 0).then(|| {
            std::array::from_fn(|i| {
                let column: Vec<f64> = data.member_metrics.iter().map(|m| m[i]).collect();
                stats_of(&column, MAXIMIZE[i])
            })
        });
        summary.push(SummaryRow {
            dist: key.dist,
            sigma: data.sigma,
            loss: data.loss,
            n,
            stats,
        });
    }

    // WES digests: walk β groups (BTreeMap order is β-ascending) per
    // (distribution, σ) and keep the best group mean per metric.
    let mut best_rows: BTreeMap<(DistributionKind, u64), WesBestRow> = BTreeMap::new();
    for row in &summary {
        let (Some(beta), Some(stats)) = (row.loss.beta(), row.stats.as_ref()) else {
            continue;
        };
        let entry = best_rows
            .entry((row.dist, ordered_bits(row.sigma)))
            .or_insert_with(|| WesBestRow {
                dist: row.dist,
                sigma: row.sigma,
                n: 0,
                stats: *stats,
                best_beta: [beta; 6],
            });
        if entry.n == 0 {
            // First group initializes everything.
            entry.n = row.n;
            continue;
        }
        entry.n += row.n;
        for i in 0..6 {
            let better = if MAXIMIZE[i] {
                stats[i].mean > entry.stats[i].mean
            } else {
                stats[i].mean < entry.stats[i].mean
            };
            if better {
                entry.stats[i].mean = stats[i].mean;
                entry.stats[i].sd = stats[i].sd;
                entry.best_beta[i] = beta;
            }
            // The `best` field tracks every member of every β.
            entry.stats[i].best = if MAXIMIZE[i] {
                entry.stats[i].best.max(stats[i].best)
            } else {
                entry.stats[i].best.min(stats[i].best)
            };
        }
    }

    (summary, best_rows.into_values().collect())
}

/// The provenance header stamped into every artifact.
pub fn artifact_meta(config: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    Ok(vec![
        ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ("config_hash".to_string(), config.config_hash()?),
        ("prng".to_string(), PRNG_ID.to_string()),
    ])
}

fn write_csv_file(
    path: &Path,
    meta: &[(String, String)],
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<()> {
    let mut buf = Vec::new();
    for (k, v) in meta {
        writeln!(buf, "# {k}={v}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)
        .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let buf = w
        .into_inner()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

const RESULTS_HEADER: [&str; 15] = [
    "distribution",
    "sigma",
    "loss",
    "beta",
    "member",
    "seed",
    "rmse",
    "cc",
    "overlap",
    "extreme_rmse",
    "p1_tail_mean",
    "p99_tail_mean",
    "train_loss_final",
    "wall_seconds",
    "status",
];

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Write all member rows. Values use shortest round-trip formatting, so the
/// file reads back to the exact same floats.
pub fn write_results_csv(
    path: &Path,
    rows: &[ExperimentResult],
    meta: &[(String, String)],
) -> Result<()> {
    let records = rows
        .iter()
        .map(|row| {
            let (loss_col, beta_col) = loss_columns(&row.loss);
            let m = row.metrics.as_ref();
            vec![
                row.dist.to_string(),
                fmt_f64(row.sigma),
                loss_col,
                beta_col,
                row.member.to_string(),
                row.seed.to_string(),
                opt_cell(m.map(|m| m.rmse)),
                opt_cell(m.map(|m| m.cc)),
                opt_cell(m.map(|m| m.overlap)),
                opt_cell(m.map(|m| m.extreme_rmse)),
                opt_cell(m.map(|m| m.p1_tail_mean)),
                opt_cell(m.map(|m| m.p99_tail_mean)),
                opt_cell(row.train_loss_final),
                fmt_f64(row.wall_seconds),
                row.status.clone(),
            ]
        })
        .collect();
    write_csv_file(path, meta, &RESULTS_HEADER, records)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    what: &str,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Parse(format!("results row missing column {idx} ({what})")))?;
    raw.parse::<T>()
        .map_err(|_| Error::Parse(format!("bad {what} value {raw:?} in results file")))
}

fn parse_opt_field(record: &csv::StringRecord, idx: usize, what: &str) -> Result<Option<f64>> {
    match record.get(idx) {
        None | Some("") => Ok(None),
        Some(raw) => raw
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Parse(format!("bad {what} value {raw:?} in results file"))),
    }
}

/// Read a `results.csv` back into result rows (the `report` path).
pub fn read_results_csv(path: &Path) -> Result<Vec<ExperimentResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if headers.len() != RESULTS_HEADER.len() {
            return Err(Error::Parse(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                RESULTS_HEADER.len(),
                headers.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let dist: DistributionKind = parse_field(&record, 0, "distribution")?;
        let sigma: f64 = parse_field(&record, 1, "sigma")?;
        let loss_col = record.get(2).unwrap_or_default();
        let beta_col = record.get(3).unwrap_or_default();
        let loss = if loss_col == "wes" {
            let beta: f64 = beta_col
                .parse()
                .map_err(|_| Error::Parse(format!("bad beta {beta_col:?} for a wes row")))?;
            LossSpec::Wes { beta }
        } else {
            loss_col.parse::<LossSpec>()?
        };
        let metrics = match (
            parse_opt_field(&record, 6, "rmse")?,
            parse_opt_field(&record, 7, "cc")?,
            parse_opt_field(&record, 8, "overlap")?,
            parse_opt_field(&record, 9, "extreme_rmse")?,
            parse_opt_field(&record, 10, "p1_tail_mean")?,
            parse_opt_field(&record, 11, "p99_tail_mean")?,
        ) {
            (Some(rmse), Some(cc), Some(overlap), Some(extreme_rmse), Some(p1), Some(p99)) => {
                Some(RowMetrics {
                    rmse,
                    cc,
                    overlap,
                    extreme_rmse,
                    p1_tail_mean: p1,
                    p99_tail_mean: p99,
                })
            }
            _ => None,
        };
        rows.push(ExperimentResult {
            dist,
            sigma,
            loss,
            member: parse_field(&record, 4, "member")?,
            seed: parse_field(&record, 5, "seed")?,
            metrics,
            train_loss_final: parse_opt_field(&record, 12, "train_loss_final")?,
            wall_seconds: parse_field(&record, 13, "wall_seconds")?,
            status: record.get(14).unwrap_or_default().to_string(),
        });
    }
    Ok(rows)
}

fn summary_header() -> Vec<String> {
    let mut header = vec![
        "distribution".to_string(),
        "sigma".to_string(),
        "loss".to_string(),
        "beta".to_string(),
        "n".to_string(),
    ];
    for name in RowMetrics::NAMES {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_sd"));
        header.push(format!("{name}_best"));
    }
    for name in RowMetrics::NAMES {
        header.push(format!("{name}_best_beta"));
    }
    header
}

fn summary_record(row: &SummaryRow) -> Vec<String> {
    let (loss_col, beta_col) = loss_columns(&row.loss);
    let mut record = vec![
        row.dist.to_string(),
        fmt_f64(row.sigma),
        loss_col,
        beta_col,
        row.n.to_string(),
    ];
    match &row.stats {
        Some(stats) => {
            for s in stats {
                record.push(fmt_f64(s.mean));
                record.push(fmt_f64(s.sd));
                record.push(fmt_f64(s.best));
            }
        }
        None => record.extend(std::iter::repeat_n(String::new(), 18)),
    }
    record.extend(std::iter::repeat_n(String::new(), 6)); // no best-β columns
    record
}

fn wes_best_record(row: &WesBestRow) -> Vec<String> {
    let mut record = vec![
        row.dist.to_string(),
        fmt_f64(row.sigma),
        "wes:best".to_string(),
        String::new(),
        row.n.to_string(),
    ];
    for s in &row.stats {
        record.push(fmt_f64(s.mean));
        record.push(fmt_f64(s.sd));
        record.push(fmt_f64(s.best));
    }
    for beta in &row.best_beta {
        record.push(fmt_f64(*beta));
    }
    record
}

/// Interleave `wes:best` digests after the loss rows of their
/// (distribution, σ) block.
fn blocks<'a>(
    summary: &'a [SummaryRow],
    bests: &'a [WesBestRow],
) -> Vec<(Vec<&'a SummaryRow>, Option<&'a WesBestRow>)> {
    let mut out: Vec<(Vec<&SummaryRow>, Option<&WesBestRow>)> = Vec::new();
    let mut current: Option<(DistributionKind, u64)> = None;
    for row in summary {
        let key = (row.dist, ordered_bits(row.sigma));
        if current != Some(key) {
            current = Some(key);
            let best = bests
                .iter()
                .find(|b| b.dist == row.dist && ordered_bits(b.sigma) == key.1);
            out.push((Vec::new(), best));
        }
        out.last_mut().unwrap().0.push(row);
    }
    out
}

pub fn write_summary_csv(
    path: &Path,
    summary: &[SummaryRow],
    bests: &[WesBestRow],
    meta: &[(String, String)],
) -> Result<()> {
    let header = summary_header();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut records = Vec::new();
    for (rows, best) in blocks(summary, bests) {
        records.extend(rows.iter().map(|r| summary_record(r)));
        if let Some(best) = best {
            records.push(wes_best_record(best));
        }
    }
    write_csv_file(path, meta, &header_refs, records)
}

pub fn write_table2_csv(
    path: &Path,
    summary: &[SummaryRow],
    bests: &[WesBestRow],
    meta: &[(String, String)],
) -> Result<()> {
    let header = [
        "distribution",
        "sigma",
        "loss",
        "beta",
        "n",
        "p1_mean",
        "p1_sd",
        "p99_mean",
        "p99_sd",
    ];
    let mut records = Vec::new();
    for (rows, best) in blocks(summary, bests) {
        for row in rows {
            let (loss_col, beta_col) = loss_columns(&row.loss);
            let mut record = vec![
                row.dist.to_string(),
                fmt_f64(row.sigma),
                loss_col,
                beta_col,
                row.n.to_string(),
            ];
            match &row.stats {
                Some(stats) => record.extend([
                    fmt_f64(stats[4].mean),
                    fmt_f64(stats[4].sd),
                    fmt_f64(stats[5].mean),
                    fmt_f64(stats[5].sd),
                ]),
                None => record.extend(std::iter::repeat_n(String::new(), 4)),
            }
            records.push(record);
        }
        if let Some(best) = best {
            records.push(vec![
                best.dist.to_string(),
                fmt_f64(best.sigma),
                "wes:best".to_string(),
                String::new(),
                best.n.to_string(),
                fmt_f64(best.stats[4].mean),
                fmt_f64(best.stats[4].sd),
                fmt_f64(best.stats[5].mean),
                fmt_f64(best.stats[5].sd),
            ]);
        }
    }
    write_csv_file(path, meta, &header, records)
}

/// Long-form series for metric-vs-σ plots: one row per
/// (distribution, metric, σ, loss).
pub fn write_fig3(
    path: &Path,
    summary: &[SummaryRow],
    bests: &[WesBestRow],
    meta: &[(String, String)],
) -> Result<()> {
    let mut table = TsvTable::new([
        "distribution",
        "metric",
        "sigma",
        "loss",
        "beta",
        "mean",
        "sd",
        "best",
    ]);
    table.meta = meta.to_vec();
    for (metric_idx, name) in RowMetrics::NAMES.iter().enumerate() {
        for row in summary {
            let Some(stats) = &row.stats else { continue };
            let (loss_col, beta_col) = loss_columns(&row.loss);
            table.push_row([
                row.dist.to_string(),
                name.to_string(),
                fmt_f64(row.sigma),
                loss_col,
                beta_col,
                fmt_f64(stats[metric_idx].mean),
                fmt_f64(stats[metric_idx].sd),
                fmt_f64(stats[metric_idx].best),
            ])?;
        }
        for best in bests {
            table.push_row([
                best.dist.to_string(),
                name.to_string(),
                fmt_f64(best.sigma),
                "wes:best".to_string(),
                fmt_f64(best.best_beta[metric_idx]),
                fmt_f64(best.stats[metric_idx].mean),
                fmt_f64(best.stats[metric_idx].sd),
                fmt_f64(best.stats[metric_idx].best),
            ])?;
        }
    }
    table.write(path)
}

/// Weighting-curve tables: `x`, the clamped PDF fit, and `g(x)` per β.
pub fn write_fig1(
    config: &ExperimentConfig,
    out_dir: &Path,
    meta: &[(String, String)],
) -> Result<()> {
    const GRID: usize = 1001;
    let mut betas = config.betas.clone();
    betas.sort_by(|a, b| a.total_cmp(b));
    let mut dists = config.distributions.clone();
    dists.sort();
    for dist in dists {
        let curve = default_label_curve(dist)?;
        let weightings: Vec<_> = betas
            .iter()
            .map(|&beta| build_weighting(&curve.values, config.pdf_bins, config.poly_degree, beta))
            .collect::<Result<_>>()?;
        let mut columns = vec!["x".to_string(), "f_hat".to_string()];
        columns.extend(betas.iter().map(|b| format!("g_beta_{b}")));
        let mut table = TsvTable::new(columns);
        table.meta = meta.to_vec();
        for i in 0..GRID {
            let x = i as f64 / (GRID - 1) as f64;
            let mut row = vec![fmt_f64(x), fmt_f64(weightings[0].eval_pdf_clamped(x))];
            row.extend(weightings.iter().map(|w| fmt_f64(w.eval_weight(x))));
            table.push_row(row)?;
        }
        table.write(&out_dir.join(format!("fig1_weighting_{dist}.tsv")))?;
    }
    Ok(())
}

/// Store the strided member-0 predictions per distribution. Skipped when a
/// distribution has no samples (so `report` reruns never clobber data they
/// cannot rebuild).
pub fn write_predictions(
    samples: &[PredSample],
    out_dir: &Path,
    meta: &[(String, String)],
) -> Result<()> {
    let mut by_dist: BTreeMap<DistributionKind, Vec<&PredSample>> = BTreeMap::new();
    for s in samples {
        by_dist.entry(s.dist).or_default().push(s);
    }
    for (dist, mut samples) in by_dist {
        samples.sort_by(|a, b| {
            let (ka, kb) = (a.loss.sort_key(), b.loss.sort_key());
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        });
        let curve = default_label_curve(dist)?;
        let indices: Vec<usize> = (0..curve.len()).step_by(PRED_SAMPLE_STRIDE).collect();
        for s in &samples {
            if s.preds.len() != indices.len() {
                return Err(Error::Shape(format!(
                    "prediction sample for {dist} has {} points, expected {}",
                    s.preds.len(),
                    indices.len()
                )));
            }
        }
        let mut columns = vec!["t".to_string(), "label".to_string()];
        columns.extend(samples.iter().map(|s| format!("pred_{}", s.loss.id())));
        let mut table = TsvTable::new(columns);
        table.meta = meta.to_vec();
        table
            .meta
            .push(("sigma".to_string(), fmt_f64(samples[0].sigma)));
        table.meta.push(("member".to_string(), "0".to_string()));
        table
            .meta
            .push(("stride".to_string(), PRED_SAMPLE_STRIDE.to_string()));
        for (row_idx, &j) in indices.iter().enumerate() {
            let mut row = vec![fmt_f64(curve.time_at(j)), fmt_f64(curve.values[j])];
            row.extend(samples.iter().map(|s| fmt_f64(s.preds[row_idx])));
            table.push_row(row)?;
        }
        table.write(&out_dir.join(format!("predictions_{dist}.tsv")))?;
    }
    Ok(())
}

fn density_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in values {
        let mut idx = ((v - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1.0;
    }
    let n = values.len() as f64;
    counts.iter().map(|c| c / (n * width)).collect()
}

/// Build the prediction-vs-label scatter and overlaid-PDF files from a
/// stored predictions table: every non-WES loss plus the WES β with the best
/// mean overlap at that (distribution, σ).
pub fn write_fig4(
    config: &ExperimentConfig,
    out_dir: &Path,
    summary: &[SummaryRow],
    meta: &[(String, String)],
) -> Result<()> {
    let mut dists = config.distributions.clone();
    dists.sort();
    for dist in dists {
        let source = out_dir.join(format!("predictions_{dist}.tsv"));
        if !source.exists() {
            continue;
        }
        let table = TsvTable::read(&source)?;
        let sigma: f64 = table
            .meta
            .iter()
            .find(|(k, _)| k == "sigma")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(f64::NAN);

        // Parse "pred_<id>" columns back into loss specs.
        let mut pred_columns: Vec<(LossSpec, String)> = Vec::new();
        for name in &table.columns {
            if let Some(id) = name.strip_prefix("pred_") {
                pred_columns.push((id.parse::<LossSpec>()?, name.clone()));
            }
        }

        // The WES column to feature: best mean overlap at this (dist, σ).
        let best_beta = summary
            .iter()
            .filter(|r| {
                r.dist == dist
                    && r.sigma.to_bits() == sigma.to_bits()
                    && r.loss.beta().is_some()
                    && r.stats.is_some()
            })
            .max_by(|a, b| {
                let (sa, sb) = (a.stats.as_ref().unwrap(), b.stats.as_ref().unwrap());
                sa[2]
                    .mean
                    .total_cmp(&sb[2].mean)
                    // Ties prefer the smaller β (max_by keeps the later
                    // element on Equal, so order descending by β first).
                    .then(b.loss.beta().unwrap().total_cmp(&a.loss.beta().unwrap()))
            })
            .and_then(|r| r.loss.beta());

        let chosen: Vec<&(LossSpec, String)> = pred_columns
            .iter()
            .filter(|(loss, _)| match (loss.beta(), best_beta) {
                (None, _) => true,
                (Some(b), Some(best)) => b.to_bits() == best.to_bits(),
                (Some(_), None) => false,
            })
            .collect();
        if chosen.is_empty() {
            continue;
        }

        let t = table.float_column("t")?;
        let labels = table.float_column("label")?;
        let preds: Vec<(String, Vec<f64>)> = chosen
            .iter()
            .map(|(loss, col)| Ok((loss.id(), table.float_column(col)?)))
            .collect::<Result<_>>()?;

        // Scatter file: t, label, one prediction column per chosen loss.
        let mut columns = vec!["t".to_string(), "label".to_string()];
        columns.extend(preds.iter().map(|(id, _)| format!("pred_{id}")));
        let mut scatter = TsvTable::new(columns);
        scatter.meta = meta.to_vec();
        scatter.meta.push(("sigma".to_string(), fmt_f64(sigma)));
        for j in 0..labels.len() {
            let mut row = vec![fmt_f64(t[j]), fmt_f64(labels[j])];
            row.extend(preds.iter().map(|(_, p)| fmt_f64(p[j])));
            scatter.push_row(row)?;
        }
        scatter.write(&out_dir.join(format!("fig4_scatter_{dist}.tsv")))?;

        // Histogram file: label and prediction densities on one shared range.
        let mut lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (_, p) in &preds {
            lo = p.iter().cloned().fold(lo, f64::min);
            hi = p.iter().cloned().fold(hi, f64::max);
        }
        let bins = config.overlap_bins;
        let width = (hi - lo) / bins as f64;
        let mut columns = vec!["bin_center".to_string(), "label".to_string()];
        columns.extend(preds.iter().map(|(id, _)| id.clone()));
        let mut hist = TsvTable::new(columns);
        hist.meta = meta.to_vec();
        hist.meta.push(("sigma".to_string(), fmt_f64(sigma)));
        let label_density = density_histogram(&labels, lo, hi, bins);
        let pred_densities: Vec<Vec<f64>> = preds
            .iter()
            .map(|(_, p)| density_histogram(p, lo, hi, bins))
            .collect();
        for b in 0..bins {
            let mut row = vec![
                fmt_f64(lo + (b as f64 + 0.5) * width),
                fmt_f64(label_density[b]),
            ];
            row.extend(pred_densities.iter().map(|d| fmt_f64(d[b])));
            hist.push_row(row)?;
        }
        hist.write(&out_dir.join(format!("fig4_hist_{dist}.tsv")))?;
    }
    Ok(())
}

/// Write the full artifact set for one sweep (or regeneration).
pub fn emit_reports(
    config: &ExperimentConfig,
    rows: &[ExperimentResult],
    samples: &[PredSample],
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let meta = artifact_meta(config)?;

    let mut echo = String::new();
    for (k, v) in &meta {
        echo.push_str(&format!("# {k}={v}\n"));
    }
    echo.push_str(&config.echo_toml()?);
    let echo_path = out_dir.join("config.echo.toml");
    std::fs::write(&echo_path, echo).map_err(|e| Error::io(&echo_path, e))?;

    let mut sorted: Vec<ExperimentResult> = rows.to_vec();
    sorted.sort_by(|a, b| {
        crate::runner::execute::compare_keys(
            &(a.dist, a.sigma, a.loss, a.member),
            &(b.dist, b.sigma, b.loss, b.member),
        )
    });

    write_results_csv(&out_dir.join("results.csv"), &sorted, &meta)?;
    let (summary, bests) = aggregate(&sorted);
    write_summary_csv(&out_dir.join("summary.csv"), &summary, &bests, &meta)?;
    write_table2_csv(&out_dir.join("table2.csv"), &summary, &bests, &meta)?;
    write_fig3(&out_dir.join("fig3.tsv"), &summary, &bests, &meta)?;
    write_fig1(config, out_dir, &meta)?;
    write_predictions(samples, out_dir, &meta)?;
    write_fig4(config, out_dir, &summary, &meta)?;
    Ok(())
}

/// Rebuild every derived artifact from a stored results directory.
///
/// Reads `config.echo.toml` (the header comments are valid TOML comments)
/// and `results.csv`; prediction tables already on disk are reused for the
/// scatter/histogram files rather than recomputed.
pub fn regenerate_reports(results_dir: &Path) -> Result<()> {
    let echo_path = results_dir.join("config.echo.toml");
    let text = std::fs::read_to_string(&echo_path).map_err(|e| Error::io(&echo_path, e))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", echo_path.display())))?;
    config.validate()?;
    let rows = read_results_csv(&results_dir.join("results.csv"))?;
    emit_reports(&config, &rows, &[], results_dir)
}
