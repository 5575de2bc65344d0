//! Declarative experiment configuration.
//!
//! A config is a single TOML file; every field has a default, so the empty
//! file is a valid desk-scale experiment. The effective config (after CLI
//! overrides) is echoed into the output directory, and its SHA-256 prefix is
//! stamped into every artifact header so files can be traced back to the
//! exact settings that produced them.

use crate::curvegen::DistributionKind;
use crate::losses::LossSpec;
use crate::network::TrainConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// The noise grid of the study: σ from 0.01 to 0.10 in steps of 0.01.
pub fn default_sigmas() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 100.0).collect()
}

/// The β grid of the study.
pub fn default_betas() -> Vec<f64> {
    vec![
        1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 15.0, 20.0, 25.0, 30.0,
    ]
}

/// The benchmark loss set: the five comparison families at their studied
/// hyperparameters, plus `wes`, which expands over the β grid.
pub fn default_losses() -> Vec<String> {
    [
        "mse",
        "mae",
        "huber:0.5",
        "huber:5",
        "huber:10",
        "logcosh",
        "quantile:0.25",
        "quantile:0.75",
        "wes",
    ]
    .map(str::to_string)
    .to_vec()
}

/// Full description of one experiment sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distributions: Vec<DistributionKind>,
    pub sigmas: Vec<f64>,
    /// β values substituted for a bare `wes` entry in `losses`.
    pub betas: Vec<f64>,
    /// Loss identifiers; `wes` (without a β) expands over `betas`.
    pub losses: Vec<String>,
    /// Training runs per grid cell; the study used 100, desk scale is 10.
    pub ensemble_size: usize,
    pub master_seed: u64,
    /// Histogram bins for the label-PDF estimate behind `g(x)`.
    pub pdf_bins: usize,
    /// Histogram bins for the overlap metric.
    pub overlap_bins: usize,
    /// Degree of the PDF polynomial fit.
    pub poly_degree: usize,
    /// Fresh noise per ensemble member (true) or one shared noisy dataset
    /// per (distribution, σ) cell (false).
    pub fresh_noise_per_member: bool,
    pub output_dir: PathBuf,
    /// Training hyperparameters. The `seed` field is ignored during sweeps:
    /// each member derives its own seed from `master_seed` and its key.
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            distributions: DistributionKind::ALL.to_vec(),
            sigmas: default_sigmas(),
            betas: default_betas(),
            losses: default_losses(),
            ensemble_size: 10,
            master_seed: 42,
            pdf_bins: 100,
            overlap_bins: 100,
            poly_degree: 12,
            fresh_noise_per_member: true,
            output_dir: PathBuf::from("out"),
            train: TrainConfig::default(),
        }
    }
}

fn has_duplicate_f64(values: &[f64]) -> bool {
    let mut seen: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
    seen.sort_unstable();
    seen.windows(2).any(|w| w[0] == w[1])
}

impl ExperimentConfig {
    /// Read and validate a TOML config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distributions.is_empty() {
            return Err(Error::Config("no distributions selected".into()));
        }
        let mut dists = self.distributions.clone();
        dists.sort();
        if dists.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate distribution in config".into()));
        }
        if self.sigmas.is_empty() {
            return Err(Error::Config("no noise levels selected".into()));
        }
        if let Some(bad) = self.sigmas.iter().find(|s| !(**s >= 0.0)) {
            return Err(Error::Config(format!("negative noise level {bad}")));
        }
        if has_duplicate_f64(&self.sigmas) {
            return Err(Error::Config("duplicate noise level in config".into()));
        }
        if let Some(bad) = self.betas.iter().find(|b| !(**b >= 1.0)) {
            return Err(Error::Config(format!(
                "beta must be at least 1 (the weight floor c), got {bad}"
            )));
        }
        if has_duplicate_f64(&self.betas) {
            return Err(Error::Config("duplicate beta in config".into()));
        }
        if self.ensemble_size < 1 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        if self.pdf_bins < 2 {
            return Err(Error::Config("pdf_bins must be at least 2".into()));
        }
        if self.overlap_bins < 1 {
            return Err(Error::Config("overlap_bins must be at least 1".into()));
        }
        if self.poly_degree < 1 {
            return Err(Error::Config("poly_degree must be at least 1".into()));
        }
        self.train.validate()?;
        // Expansion also parses each loss id and rejects duplicates.
        self.expanded_losses()?;
        Ok(())
    }

    /// Resolve the loss-id list into concrete specs: a bare `wes` expands
    /// over the β grid, everything else parses as-is.
    pub fn expanded_losses(&self) -> Result<Vec<LossSpec>> {
        if self.losses.is_empty() {
            return Err(Error::Config("no losses selected".into()));
        }
        let mut specs = Vec::new();
        for id in &self.losses {
            if id.trim().eq_ignore_ascii_case("wes") {
                if self.betas.is_empty() {
                    return Err(Error::Config(
                        "`wes` in losses requires a nonempty beta grid".into(),
                    ));
                }
                specs.extend(self.betas.iter().map(|&beta| LossSpec::Wes { beta }));
            } else {
                specs.push(id.parse::<LossSpec>()?);
            }
        }
        let mut ids: Vec<String> = specs.iter().map(LossSpec::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "duplicate loss {:?} in config",
                w[0]
            )));
        }
        Ok(specs)
    }

    /// The effective config as TOML text (the echo artifact body).
    pub fn echo_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("config serialization failed: {e}")))
    }

    /// First 16 hex characters of the SHA-256 of the echoed config; stamped
    /// into every artifact header.
    ///
    /// `output_dir` is blanked before hashing: the hash identifies the
    /// experiment (grid, seeds, training setup), and the same experiment
    /// stored in two places must carry the same hash.
    pub fn config_hash(&self) -> Result<String> {
        let mut keyed = self.clone();
        keyed.output_dir = PathBuf::new();
        let digest = Sha256::digest(keyed.echo_toml()?.as_bytes());
        Ok(digest
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()[..16]
            .to_string())
    }
}
