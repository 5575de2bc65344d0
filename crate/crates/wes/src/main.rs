//! `wes` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime or numeric
//! failure. `WES_WORKERS` sets the default sweep worker count; `--workers`
//! overrides it. Numbers printed to the terminal use 6 significant digits;
//! values stored in artifact files keep full precision.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use wes::columnar::{fmt_f64, TsvTable};
use wes::curvegen::{default_label_curve, DistributionKind};
use wes::losses::LossSpec;
use wes::metrics::{full_report, MetricReport, DEFAULT_OVERLAP_BINS};
use wes::network::{predict, save_model, train, TrainConfig};
use wes::runner::{emit_reports, regenerate_reports, run_experiment, ExperimentConfig};
use wes::signals::{
    add_noise, cosine_coefficients, select_harmonics, synthesize_features, DEFAULT_FEATURE_COUNT,
    DEFAULT_SPECTRUM_TERMS,
};
use wes::weighting::build_weighting;
use wes::{fmt_sig6, Error, Result, PRNG_ID, TOOL_VERSION};

#[derive(Parser)]
#[command(
    name = "wes",
    version,
    about = "Weighted-empirical-stretching loss benchmark suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the label curve, cosine spectrum, selected harmonics, and
    /// feature table for one distribution.
    Generate {
        /// Distribution kind: unimodal | skewed-unimodal | bimodal | skewed-bimodal
        #[arg(long)]
        dist: String,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Noise standard deviation added to the features (0 = noiseless).
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Noise seed (ignored when sigma is 0).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a single training job and print its metric report as JSON.
    Train {
        /// Distribution kind.
        #[arg(long)]
        dist: String,
        /// Loss identifier: mse | mae | huber:<delta> | logcosh |
        /// quantile:<gamma> | wes:<beta> (or `wes` plus --beta).
        #[arg(long)]
        loss: String,
        /// Noise standard deviation.
        #[arg(long)]
        sigma: f64,
        /// WES stretching parameter (only with --loss wes).
        #[arg(long)]
        beta: Option<f64>,
        /// Seed for noise, weight init, and batch order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for model, predictions, and metrics.
        #[arg(long)]
        out: PathBuf,
        /// Override the number of training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the holdout fraction (0 trains on every sample).
        #[arg(long)]
        holdout: Option<f64>,
    },
    /// Run the full experiment grid described by a TOML config file.
    Sweep {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: WES_WORKERS, then the CPU count).
        #[arg(long)]
        workers: Option<usize>,
        /// Restore the published ensemble size of 100 members.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Regenerate summary tables and plot data from stored results.
    Report {
        /// Directory holding config.echo.toml and results.csv.
        #[arg(long)]
        results: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            dist,
            out,
            sigma,
            seed,
        } => generate(&dist, &out, sigma, seed),
        Command::Train {
            dist,
            loss,
            sigma,
            beta,
            seed,
            out,
            epochs,
            holdout,
        } => single_train(&dist, &loss, sigma, beta, seed, &out, epochs, holdout),
        Command::Sweep {
            config,
            workers,
            paper_scale,
        } => sweep(&config, workers, paper_scale),
        Command::Report { results } => regenerate_reports(&results),
    }
}

fn base_meta() -> Vec<(String, String)> {
    vec![
        ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ("prng".to_string(), PRNG_ID.to_string()),
    ]
}

fn generate(dist: &str, out: &Path, sigma: f64, seed: u64) -> Result<()> {
    let kind: DistributionKind = dist.parse()?;
    let curve = default_label_curve(kind)?;
    let spectrum = cosine_coefficients(&curve, DEFAULT_SPECTRUM_TERMS)?;
    let harmonics = select_harmonics(&spectrum, DEFAULT_FEATURE_COUNT)?;
    let base = synthesize_features(&harmonics, &curve.time_grid(), curve.domain_length)?;
    let features = add_noise(&base, sigma, seed)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut meta = base_meta();
    meta.push(("distribution".to_string(), kind.to_string()));
    meta.push(("sigma".to_string(), fmt_f64(sigma)));
    meta.push(("seed".to_string(), seed.to_string()));

    let mut label_table = TsvTable::new(["t", "label"]);
    label_table.meta = meta.clone();
    for j in 0..curve.len() {
        label_table.push_row([fmt_f64(curve.time_at(j)), fmt_f64(curve.values[j])])?;
    }
    label_table.write(&out.join("label_curve.tsv"))?;

    let mut spectrum_table = TsvTable::new(["i", "a_i"]);
    spectrum_table.meta = meta.clone();
    spectrum_table.push_row(["0".to_string(), fmt_f64(spectrum.a0)])?;
    for i in 1..=spectrum.k() {
        spectrum_table.push_row([i.to_string(), fmt_f64(spectrum.coefficient(i))])?;
    }
    spectrum_table.write(&out.join("spectrum.tsv"))?;

    let mut harmonics_table = TsvTable::new(["rank", "index", "coefficient"]);
    harmonics_table.meta = meta.clone();
    for (rank, (&idx, &a)) in harmonics
        .indices
        .iter()
        .zip(&harmonics.coefficients)
        .enumerate()
    {
        harmonics_table.push_row([(rank + 1).to_string(), idx.to_string(), fmt_f64(a)])?;
    }
    harmonics_table.write(&out.join("harmonics.tsv"))?;

    let mut columns = vec!["t".to_string()];
    columns.extend(harmonics.indices.iter().map(|i| format!("x{i}")));
    columns.push("label".to_string());
    let mut feature_table = TsvTable::new(columns);
    feature_table.meta = meta;
    for j in 0..features.n_samples() {
        let mut row = vec![fmt_f64(curve.time_at(j))];
        row.extend((0..features.n_features()).map(|k| fmt_f64(features.data[[j, k]])));
        row.push(fmt_f64(curve.values[j]));
        feature_table.push_row(row)?;
    }
    feature_table.write(&out.join("features.tsv"))?;

    println!(
        "wrote label_curve.tsv, spectrum.tsv, harmonics.tsv, features.tsv to {}",
        out.display()
    );
    Ok(())
}

fn resolve_loss(loss: &str, beta: Option<f64>) -> Result<LossSpec> {
    if loss.eq_ignore_ascii_case("wes") {
        return match beta {
            Some(b) => Ok(LossSpec::Wes { beta: b }),
            None => Err(Error::Config(
                "--loss wes needs --beta <v> (or use wes:<beta>)".into(),
            )),
        };
    }
    let spec: LossSpec = loss.parse()?;
    match (beta, &spec) {
        (None, _) => Ok(spec),
        (Some(b), LossSpec::Wes { beta }) if beta.to_bits() == b.to_bits() => Ok(spec),
        (Some(_), LossSpec::Wes { .. }) => Err(Error::Config(
            "--beta conflicts with the beta embedded in --loss".into(),
        )),
        (Some(_), _) => Err(Error::Config(format!(
            "--beta only applies to the wes loss, not {loss}"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn single_train(
    dist: &str,
    loss: &str,
    sigma: f64,
    beta: Option<f64>,
    seed: u64,
    out: &Path,
    epochs: Option<usize>,
    holdout: Option<f64>,
) -> Result<()> {
    let kind: DistributionKind = dist.parse()?;
    let loss = resolve_loss(loss, beta)?;
    let default_config = ExperimentConfig::default();

    let curve = default_label_curve(kind)?;
    let spectrum = cosine_coefficients(&curve, DEFAULT_SPECTRUM_TERMS)?;
    let harmonics = select_harmonics(&spectrum, DEFAULT_FEATURE_COUNT)?;
    let base = synthesize_features(&harmonics, &curve.time_grid(), curve.domain_length)?;
    let features = add_noise(&base, sigma, seed)?;

    let weight_values = match loss.beta() {
        Some(b) => {
            let weighting = build_weighting(
                &curve.values,
                default_config.pdf_bins,
                default_config.poly_degree,
                b,
            )?;
            Some(weighting.weights_for(&curve.values))
        }
        None => None,
    };

    let mut train_config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(e) = epochs {
        train_config.epochs = e;
    }
    if let Some(h) = holdout {
        train_config.holdout_fraction = h;
    }

    let model = train(
        &features,
        &curve.values,
        &loss,
        weight_values.as_deref(),
        &train_config,
    )?;
    let preds = predict(&model, &features)?;
    let report = full_report(&preds, &curve.values, DEFAULT_OVERLAP_BINS)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_model(&model, &out.join("model.txt"))?;

    let mut meta = base_meta();
    meta.push(("distribution".to_string(), kind.to_string()));
    meta.push(("loss".to_string(), loss.id()));
    meta.push(("sigma".to_string(), fmt_f64(sigma)));
    meta.push(("seed".to_string(), seed.to_string()));
    let mut pred_table = TsvTable::new(["t", "label", "pred"]);
    pred_table.meta = meta;
    for (j, &pred) in preds.iter().enumerate() {
        pred_table.push_row([
            fmt_f64(curve.time_at(j)),
            fmt_f64(curve.values[j]),
            fmt_f64(pred),
        ])?;
    }
    pred_table.write(&out.join("predictions.tsv"))?;

    let metrics_path = out.join("metrics.json");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Parse(format!("metric serialization failed: {e}")))?;
    std::fs::write(&metrics_path, json).map_err(|e| Error::io(&metrics_path, e))?;

    println!("{}", report_json_sig6(&report));
    Ok(())
}

/// The terminal-facing report: same shape as metrics.json, 6 significant
/// digits.
fn report_json_sig6(report: &MetricReport) -> String {
    let fields = [
        ("rmse", report.rmse),
        ("cc", report.cc),
        ("overlap", report.overlap),
        ("extreme_rmse", report.extreme_rmse),
        ("l1", report.l1),
        ("l2", report.l2),
        ("p1_tail_mean", report.p1_tail_mean),
        ("p99_tail_mean", report.p99_tail_mean),
    ];
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("  \"{k}\": {}", fmt_sig6(*v)))
        .collect();
    format!("{{\n{}\n}}", body.join(",\n"))
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        return Ok(n);
    }
    if let Ok(raw) = std::env::var("WES_WORKERS") {
        let n: usize = raw.parse().map_err(|_| {
            Error::Config(format!(
                "WES_WORKERS must be a positive integer, got {raw:?}"
            ))
        })?;
        if n == 0 {
            return Err(Error::Config("WES_WORKERS must be at least 1".into()));
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1))
}

fn sweep(config_path: &Path, workers: Option<usize>, paper_scale: bool) -> Result<()> {
    let mut config = ExperimentConfig::load(config_path)?;
    if paper_scale {
        config.ensemble_size = 100;
    }
    config.validate()?;
    let workers = resolve_workers(workers)?;

    let result = run_experiment(&config, workers)?;
    emit_reports(
        &config,
        &result.rows,
        &result.pred_samples,
        &config.output_dir,
    )?;

    let ok = result.rows.iter().filter(|r| r.is_ok()).count();
    let failed = result.rows.len() - ok;
    println!(
        "sweep finished: {} runs ({ok} ok, {failed} failed) -> {}",
        result.rows.len(),
        config.output_dir.display()
    );
    if failed > 0 {
        eprintln!("warning: {failed} runs failed; see the status column of results.csv");
    }
    Ok(())
}
