//! End-to-end tests of the `wes` binary: artifact layout, exit codes, and
//! cross-worker determinism of sweep outputs.

use std::path::Path;
use std::process::{Command, Output};

fn wes() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wes"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// results.csv with the wall_seconds column blanked (the one timing field
/// exempt from determinism).
fn normalized_results(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    text.lines()
        .map(|line| {
            if line.starts_with('#') || line.starts_with("distribution") {
                return line.to_string();
            }
            let mut cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 15, "unexpected column count in: {line}");
            cells[13] = "-";
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// `{}` is replaced with the output directory (before the `[train]` table,
/// so the key stays at the top level).
const SWEEP_TOML: &str = r#"
distributions = ["unimodal"]
sigmas = [0.05]
losses = ["mse", "wes"]
betas = [8.0]
ensemble_size = 2
output_dir = {}

[train]
epochs = 2
"#;

#[test]
fn generate_writes_the_four_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(wes()
        .args(["generate", "--dist", "unimodal", "--out"])
        .arg(dir.path()));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    for file in [
        "label_curve.tsv",
        "spectrum.tsv",
        "harmonics.tsv",
        "features.tsv",
    ] {
        let path = dir.path().join(file);
        assert!(path.exists(), "{file} missing");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("# tool_version="),
            "{file} lacks provenance header"
        );
    }

    let labels = std::fs::read_to_string(dir.path().join("label_curve.tsv")).unwrap();
    let data_rows = labels.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, 40_000);

    let features = std::fs::read_to_string(dir.path().join("features.tsv")).unwrap();
    let header = features.lines().find(|l| !l.starts_with('#')).unwrap();
    let cols: Vec<&str> = header.split('\t').collect();
    assert_eq!(cols.len(), 7, "t + 5 harmonics + label");
    assert_eq!(cols[0], "t");
    assert_eq!(cols[6], "label");
    assert!(cols[1].starts_with('x'));
}

#[test]
fn train_prints_a_metric_report_and_stores_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(wes()
        .args([
            "train", "--dist", "unimodal", "--loss", "wes:8", "--sigma", "0.05", "--seed", "7",
            "--epochs", "2", "--out",
        ])
        .arg(dir.path()));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let stdout = String::from_utf8_lossy(&out.stdout);
    let json: serde_json::Value = serde_json::from_str(stdout.trim()).expect("stdout is JSON");
    for key in [
        "rmse",
        "cc",
        "overlap",
        "extreme_rmse",
        "l1",
        "l2",
        "p1_tail_mean",
        "p99_tail_mean",
    ] {
        let v = json[key]
            .as_f64()
            .unwrap_or_else(|| panic!("{key} missing"));
        assert!(v.is_finite(), "{key} not finite");
    }

    for file in ["model.txt", "predictions.tsv", "metrics.json"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["rmse"].as_f64().unwrap().is_finite());
}

#[test]
fn config_errors_exit_with_code_1() {
    // Unknown loss id.
    let out = run(wes().args([
        "train", "--dist", "unimodal", "--loss", "nope", "--sigma", "0.05", "--out", "/tmp/x",
    ]));
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("error"));

    // Bare wes without --beta.
    let out = run(wes().args([
        "train", "--dist", "unimodal", "--loss", "wes", "--sigma", "0.05", "--out", "/tmp/x",
    ]));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("--beta"));

    // --beta on a non-wes loss.
    let out = run(wes().args([
        "train", "--dist", "unimodal", "--loss", "mse", "--sigma", "0.05", "--beta", "3", "--out",
        "/tmp/x",
    ]));
    assert_eq!(out.status.code(), Some(1));

    // Unknown distribution.
    let out = run(wes().args(["generate", "--dist", "trimodal", "--out", "/tmp/x"]));
    assert_eq!(out.status.code(), Some(1));

    // Clap usage errors map to 1; help/version to 0.
    let out = run(wes().args(["sweep", "--bogus-flag"]));
    assert_eq!(out.status.code(), Some(1));
    let out = run(wes().arg("--help"));
    assert_eq!(out.status.code(), Some(0));
    let out = run(wes().arg("--version"));
    assert_eq!(out.status.code(), Some(0));

    // Missing config file.
    let out = run(wes().args(["sweep", "--config", "/nonexistent/config.toml"]));
    assert_eq!(
        out.status.code(),
        Some(2),
        "I/O failures are runtime errors"
    );
}

#[test]
fn sweep_is_deterministic_across_worker_counts_and_report_rebuilds() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");

    let run_sweep = |out_dir: &Path, workers: &str| {
        let toml = SWEEP_TOML.replace("{}", &format!("{:?}", out_dir.to_str().unwrap()));
        std::fs::write(&config_path, toml).unwrap();
        let out = run(wes()
            .args(["sweep", "--workers", workers, "--config"])
            .arg(&config_path)
            .env("WES_QUIET", "1"));
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(
            stdout.contains("sweep finished: 4 runs (4 ok"),
            "stdout: {stdout}"
        );
    };

    let out1 = dir.path().join("w1");
    let out2 = dir.path().join("w2");
    run_sweep(&out1, "1");
    run_sweep(&out2, "2");

    for file in [
        "config.echo.toml",
        "results.csv",
        "summary.csv",
        "table2.csv",
        "fig3.tsv",
        "fig1_weighting_unimodal.tsv",
        "predictions_unimodal.tsv",
        "fig4_scatter_unimodal.tsv",
        "fig4_hist_unimodal.tsv",
    ] {
        assert!(out1.join(file).exists(), "{file} missing");
    }

    // Hash lines match: same effective config.
    let echo1 = std::fs::read_to_string(out1.join("config.echo.toml")).unwrap();
    let echo2 = std::fs::read_to_string(out2.join("config.echo.toml")).unwrap();
    let hash_line = |s: &str| {
        s.lines()
            .find(|l| l.starts_with("# config_hash="))
            .unwrap()
            .to_string()
    };
    assert_eq!(hash_line(&echo1), hash_line(&echo2));

    // results.csv identical across worker counts apart from wall_seconds.
    assert_eq!(normalized_results(&out1), normalized_results(&out2));

    // Derived artifacts carry no timing at all: bytes must match exactly.
    for file in [
        "summary.csv",
        "table2.csv",
        "fig3.tsv",
        "fig4_hist_unimodal.tsv",
    ] {
        assert_eq!(
            std::fs::read(out1.join(file)).unwrap(),
            std::fs::read(out2.join(file)).unwrap(),
            "{file} differs between worker counts"
        );
    }

    // `report` regenerates byte-identical derived artifacts in place.
    let before = std::fs::read(out1.join("summary.csv")).unwrap();
    std::fs::remove_file(out1.join("summary.csv")).unwrap();
    std::fs::remove_file(out1.join("fig3.tsv")).unwrap();
    let out = run(wes().args(["report", "--results"]).arg(&out1));
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(std::fs::read(out1.join("summary.csv")).unwrap(), before);
    assert!(out1.join("fig3.tsv").exists());
    // Prediction-derived files survive a report pass (not recomputable
    // without retraining).
    assert!(out1.join("fig4_scatter_unimodal.tsv").exists());
}
