//! A small fully-connected network with hand-derived backpropagation.
//!
//! The architecture is fixed in shape (sigmoid hidden layers, a single
//! linear output) and small enough that explicit matrix recurrences beat any
//! framework: forward `z_{i+1} = Θ_i·a_i + b_i`, `a_{i+1} = σ(z_{i+1})`;
//! backward `δ_i = (Θ_iᵀ·δ_{i+1}) ⊙ σ'(z_i)` with `∂J/∂Θ_i = δ_{i+1}·a_iᵀ`
//! and `∂J/∂b_i = δ_{i+1}`. Parameters update with Adam.
//!
//! Training is strictly sequential and a pure function of
//! `(data, config, seed)`: repeated runs produce bitwise-identical
//! parameters, which the experiment runner relies on.

use crate::losses::{loss_grad_elem, loss_value, LossSpec};
use crate::signals::FeatureMatrix;
use crate::{Error, Result};
use ndarray::{azip, Array, Array1, Array2, Axis, Dimension};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Substream salts for the RNGs spawned from one training seed. Deliberately
/// far from the small per-column salts used by `signals::add_noise`, so a
/// seed shared between noise generation and training never aliases streams.
const SALT_SPLIT: u64 = 1_000_003;
const SALT_EPOCH: u64 = 1_000_033;

/// Layer widths, input first. Hidden layers use the logistic sigmoid, the
/// final layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
}

impl Default for Architecture {
    /// The benchmark's fixed layout: 5 inputs, hidden 25-25-25-5, 1 output.
    fn default() -> Self {
        Architecture {
            layer_sizes: vec![5, 25, 25, 25, 5, 1],
        }
    }
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config("architecture needs at least 2 layers".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::Config(
                "the output layer must have exactly one node".into(),
            ));
        }
        Ok(Architecture { layer_sizes })
    }

    /// The default hidden stack behind an arbitrary input width.
    pub fn for_inputs(n_inputs: usize) -> Self {
        Architecture {
            layer_sizes: vec![n_inputs, 25, 25, 25, 5, 1],
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len()
    }
}

/// Weight matrices `Θ_i` (shape `n_{i+1} × n_i`) and bias vectors `b_i`
/// (one bias per node).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpParams {
    pub fn zeros_like(arch: &Architecture) -> Self {
        let sizes = &arch.layer_sizes;
        let weights = (0..sizes.len() - 1)
            .map(|i| Array2::zeros((sizes[i + 1], sizes[i])))
            .collect();
        let biases = (0..sizes.len() - 1)
            .map(|i| Array1::zeros(sizes[i + 1]))
            .collect();
        MlpParams { weights, biases }
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }
}

/// Per-parameter gradients, same shapes as [`MlpParams`].
pub type Gradients = MlpParams;

/// Adam optimizer state: first/second moments per parameter plus the step
/// counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: MlpParams,
    v: MlpParams,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(arch: &Architecture) -> Self {
        AdamState {
            m: MlpParams::zeros_like(arch),
            v: MlpParams::zeros_like(arch),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Reshuffle the batch order every epoch (the holdout split is always
    /// a seeded shuffle, independent of this flag).
    pub shuffle: bool,
    /// Fraction of samples withheld from training for loss monitoring;
    /// 0 trains on everything.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 512,
            epochs: 300,
            seed: 0,
            shuffle: true,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

/// A trained network plus its loss trajectories.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub arch: Architecture,
    pub params: MlpParams,
    /// Mean training loss per epoch (measured on the pre-update parameters
    /// of each mini-batch, the usual online estimate).
    pub train_history: Vec<f64>,
    /// Loss on the holdout split at the end of each epoch; empty when the
    /// holdout fraction is 0.
    pub holdout_history: Vec<f64>,
}

/// Activations and preactivations retained from one forward pass
/// (single sample).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `a_0..a_{L-1}`; `a_0` is the input, `a_{L-1}` the scalar output.
    pub activations: Vec<Array1<f64>>,
    /// `z_1..z_{L-1}` (index 0 holds `z_1`).
    pub preactivations: Vec<Array1<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> f64 {
        self.activations.last().unwrap()[0]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draw all parameters i.i.d. from N(0, 1).
///
/// The draw order is part of the determinism contract: for each layer, the
/// weight matrix in row-major order, then its bias vector.
pub fn init_params(arch: &Architecture, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = &arch.layer_sizes;
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for i in 0..sizes.len() - 1 {
        let (rows, cols) = (sizes[i + 1], sizes[i]);
        let mut w = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                w[(r, c)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut b = Array1::zeros(rows);
        for r in 0..rows {
            b[r] = rng.sample::<f64, _>(StandardNormal);
        }
        weights.push(w);
        biases.push(b);
    }
    MlpParams { weights, biases }
}

/// Single-sample forward pass, retaining every intermediate activation.
pub fn forward(params: &MlpParams, input: &[f64]) -> Result<ForwardTrace> {
    let n_weights = params.weights.len();
    if input.len() != params.weights[0].ncols() {
        return Err(Error::Shape(format!(
            "input width {} does not match first layer width {}",
            input.len(),
            params.weights[0].ncols()
        )));
    }
    let mut activations = Vec::with_capacity(n_weights + 1);
    let mut preactivations = Vec::with_capacity(n_weights);
    activations.push(Array1::from(input.to_vec()));
    for (i, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let z = w.dot(activations.last().unwrap()) + b;
        let a = if i + 1 < n_weights {
            z.mapv(sigmoid)
        } else {
            z.clone() // linear output layer
        };
        preactivations.push(z);
        activations.push(a);
    }
    Ok(ForwardTrace {
        activations,
        preactivations,
    })
}

/// Single-sample backpropagation given `dJ/da_L` at the (linear) output.
pub fn backward(params: &MlpParams, trace: &ForwardTrace, dj_da_out: f64) -> Gradients {
    let n = params.weights.len();
    let mut grads = MlpParams {
        weights: params
            .weights
            .iter()
            .map(|w| Array2::zeros(w.dim()))
            .collect(),
        biases: params
            .biases
            .iter()
            .map(|b| Array1::zeros(b.len()))
            .collect(),
    };
    // Linear output: σ' = 1, so δ_L is just the loss derivative.
    let mut delta = Array1::from(vec![dj_da_out]);
    for i in (0..n).rev() {
        let a_prev = &trace.activations[i];
        for (r, &d) in delta.iter().enumerate() {
            for (c, &a) in a_prev.iter().enumerate() {
                grads.weights[i][(r, c)] = d * a;
            }
        }
        grads.biases[i].assign(&delta);
        if i > 0 {
            // Hidden activations are sigmoids: σ'(z) = a·(1 − a).
            let back = params.weights[i].t().dot(&delta);
            delta = back * a_prev * &(1.0 - a_prev);
        }
    }
    grads
}

/// Batched forward pass: columns are samples. Returns the activation list
/// (`acts[0]` = input block of shape `n_0 × B`).
fn forward_batch(params: &MlpParams, input: &Array2<f64>) -> Vec<Array2<f64>> {
    let n = params.weights.len();
    let mut acts = Vec::with_capacity(n + 1);
    acts.push(input.clone());
    for i in 0..n {
        let mut z = params.weights[i].dot(acts.last().unwrap());
        z += &params.biases[i].view().insert_axis(Axis(1));
        let a = if i + 1 < n { z.mapv(sigmoid) } else { z };
        acts.push(a);
    }
    acts
}

/// Batched backpropagation. `dj_dout` must already include any batch-mean
/// normalization; the returned gradients are sums over the batch columns.
fn backward_batch(params: &MlpParams, acts: &[Array2<f64>], dj_dout: &Array1<f64>) -> Gradients {
    let n = params.weights.len();
    let mut grads = MlpParams {
        weights: Vec::with_capacity(n),
        biases: Vec::with_capacity(n),
    };
    // Fill back-to-front, then reverse.
    let mut delta: Array2<f64> = dj_dout.view().insert_axis(Axis(0)).to_owned(); // 1 × B
    for i in (0..n).rev() {
        let gw = delta.dot(&acts[i].t());
        let gb = delta.sum_axis(Axis(1));
        grads.weights.push(gw);
        grads.biases.push(gb);
        if i > 0 {
            let back = params.weights[i].t().dot(&delta);
            delta = back * &acts[i] * &(1.0 - &acts[i]);
        }
    }
    grads.weights.reverse();
    grads.biases.reverse();
    grads
}

/// One Adam update with bias correction:
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &Gradients, lr: f64) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    for i in 0..params.weights.len() {
        adam_update(
            &mut params.weights[i],
            &mut state.m.weights[i],
            &mut state.v.weights[i],
            &grads.weights[i],
            (b1, b2, eps, lr, bc1, bc2),
        );
        adam_update(
            &mut params.biases[i],
            &mut state.m.biases[i],
            &mut state.v.biases[i],
            &grads.biases[i],
            (b1, b2, eps, lr, bc1, bc2),
        );
    }
}

/// Element-wise Adam update. Layout-agnostic: batched backprop can hand back
/// column-major gradient blocks (transposed matmul results).
fn adam_update<D: Dimension>(
    theta: &mut Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    g: &Array<f64, D>,
    (b1, b2, eps, lr, bc1, bc2): (f64, f64, f64, f64, f64, f64),
) {
    azip!((theta in theta, m in m, v in v, &g in g) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

/// Gather feature rows `idx` into a column-per-sample block (`n_0 × B`).
fn gather_columns(features: &FeatureMatrix, idx: &[usize]) -> Array2<f64> {
    let n0 = features.n_features();
    let mut block = Array2::zeros((n0, idx.len()));
    for (col, &row) in idx.iter().enumerate() {
        for k in 0..n0 {
            block[(k, col)] = features.data[(row, k)];
        }
    }
    block
}

/// Evaluate the batch loss of the current parameters on a sample subset.
fn subset_loss(
    params: &MlpParams,
    features: &FeatureMatrix,
    labels: &[f64],
    weights: Option<&[f64]>,
    idx: &[usize],
    loss: &LossSpec,
) -> Result<f64> {
    let block = gather_columns(features, idx);
    let acts = forward_batch(params, &block);
    let preds: Vec<f64> = acts.last().unwrap().row(0).to_vec();
    let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
    let w: Option<Vec<f64>> = weights.map(|w| idx.iter().map(|&i| w[i]).collect());
    loss_value(loss, &preds, &y, w.as_deref())
}

/// Train the network.
///
/// The holdout split (if any) is removed before batching via a seeded
/// shuffle. Each epoch walks the training set in mini-batches of
/// `batch_size` (the final partial batch included), reshuffling the order
/// every epoch when `shuffle` is on. A non-finite batch loss aborts with a
/// diagnostic identifying the epoch and batch.
pub fn train(
    features: &FeatureMatrix,
    labels: &[f64],
    loss: &LossSpec,
    weights: Option<&[f64]>,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let t_len = features.n_samples();
    if labels.len() != t_len {
        return Err(Error::Shape(format!(
            "{} labels for {} feature rows",
            labels.len(),
            t_len
        )));
    }
    if loss.needs_weights() && weights.is_none() {
        return Err(Error::Config(
            "WES training requires precomputed per-label weights".into(),
        ));
    }
    if let Some(w) = weights {
        if w.len() != t_len {
            return Err(Error::Shape(format!(
                "{} weights for {} samples",
                w.len(),
                t_len
            )));
        }
    }

    let arch = Architecture::for_inputs(features.n_features());
    let mut params = init_params(&arch, config.seed);
    let mut adam = AdamState::new(&arch);

    // Holdout split: a seeded shuffle independent of the epoch shuffles.
    let mut split_rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(config.seed, SALT_SPLIT));
    let mut order: Vec<usize> = (0..t_len).collect();
    order.shuffle(&mut split_rng);
    let n_holdout = (t_len as f64 * config.holdout_fraction).floor() as usize;
    let (holdout_idx, train_idx_base) = order.split_at(n_holdout);
    let mut train_idx: Vec<usize> = train_idx_base.to_vec();
    if train_idx.is_empty() {
        return Err(Error::Config(
            "holdout fraction leaves no training samples".into(),
        ));
    }

    let mut epoch_rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(config.seed, SALT_EPOCH));
    let mut train_history = Vec::with_capacity(config.epochs);
    let mut holdout_history = Vec::with_capacity(if n_holdout > 0 { config.epochs } else { 0 });

    for epoch in 0..config.epochs {
        if config.shuffle {
            train_idx.shuffle(&mut epoch_rng);
        }
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in train_idx.chunks(config.batch_size).enumerate() {
            let block = gather_columns(features, batch);
            let acts = forward_batch(&params, &block);
            let out_row = acts.last().unwrap().row(0);

            let b = batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut dj = Array1::zeros(batch.len());
            for (col, &row) in batch.iter().enumerate() {
                let pred = out_row[col];
                let label = labels[row];
                let w = weights.map(|w| w[row]);
                batch_loss += match loss {
                    LossSpec::Mse => {
                        let e = pred - label;
                        e * e
                    }
                    _ => {
                        // Uniform path for the rest; MSE is special-cased
                        // only because it dominates the hot loop.
                        let wv = w.map(|w| [w]);
                        crate::losses::loss_value(
                            loss,
                            &[pred],
                            &[label],
                            wv.as_ref().map(|a| a.as_slice()),
                        )?
                    }
                };
                dj[col] = loss_grad_elem(loss, pred, label, w) / b;
            }
            batch_loss /= b;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {batch_loss} at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss * b;

            let grads = backward_batch(&params, &acts, &dj);
            adam_step(&mut adam, &mut params, &grads, config.learning_rate);
        }
        train_history.push(epoch_loss / train_idx.len() as f64);
        if n_holdout > 0 {
            holdout_history.push(subset_loss(
                &params,
                features,
                labels,
                weights,
                holdout_idx,
                loss,
            )?);
        }
    }

    Ok(TrainedModel {
        arch,
        params,
        train_history,
        holdout_history,
    })
}

/// Forward the whole feature matrix through a trained model. Outputs are
/// raw network values — never clipped to `[0, 1]`, since out-of-range
/// predictions are themselves diagnostic.
pub fn predict(model: &TrainedModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.n_features() != model.arch.n_inputs() {
        return Err(Error::Shape(format!(
            "feature width {} does not match model input width {}",
            features.n_features(),
            model.arch.n_inputs()
        )));
    }
    let t_len = features.n_samples();
    let mut out = Vec::with_capacity(t_len);
    let chunk = 8192;
    let idx: Vec<usize> = (0..t_len).collect();
    for rows in idx.chunks(chunk) {
        let block = gather_columns(features, rows);
        let acts = forward_batch(&model.params, &block);
        out.extend(acts.last().unwrap().row(0).iter().cloned());
    }
    Ok(out)
}

/// Serialize a model to a versioned, line-oriented text file: layer sizes,
/// then each layer's weight matrix (row per line) and bias vector, at full
/// round-trip precision.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let fmt_row = |row: &[f64]| {
        row.iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    (|| -> std::io::Result<()> {
        writeln!(w, "wes-model v1")?;
        writeln!(
            w,
            "layers {}",
            model
                .arch
                .layer_sizes
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        for (i, (theta, bias)) in model
            .params
            .weights
            .iter()
            .zip(&model.params.biases)
            .enumerate()
        {
            writeln!(w, "theta {} {} {}", i, theta.nrows(), theta.ncols())?;
            for row in theta.rows() {
                writeln!(w, "{}", fmt_row(row.as_slice().unwrap()))?;
            }
            writeln!(w, "bias {} {}", i, bias.len())?;
            writeln!(w, "{}", fmt_row(bias.as_slice().unwrap()))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Load a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| Error::Parse("unexpected end of model file".into()))
    };

    let header = next_line()?;
    if header.trim() != "wes-model v1" {
        return Err(Error::Parse(format!(
            "unsupported model header {header:?}; expected \"wes-model v1\""
        )));
    }
    let layers_line = next_line()?;
    let mut parts = layers_line.split_whitespace();
    if parts.next() != Some("layers") {
        return Err(Error::Parse("expected a `layers` line".into()));
    }
    let layer_sizes: Vec<usize> = parts
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad layer size {t:?}")))
        })
        .collect::<Result<_>>()?;
    let arch = Architecture::new(layer_sizes)?;

    let parse_floats = |line: &str, want: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad number {t:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != want {
            return Err(Error::Parse(format!(
                "expected {want} values on a line, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    };

    let mut params = MlpParams::zeros_like(&arch);
    for i in 0..arch.n_layers() - 1 {
        let (rows, cols) = (arch.layer_sizes[i + 1], arch.layer_sizes[i]);
        let head = next_line()?;
        if head != format!("theta {i} {rows} {cols}") {
            return Err(Error::Parse(format!("unexpected section header {head:?}")));
        }
        for r in 0..rows {
            let vals = parse_floats(&next_line()?, cols)?;
            for (c, v) in vals.into_iter().enumerate() {
                params.weights[i][(r, c)] = v;
            }
        }
        let head = next_line()?;
        if head != format!("bias {i} {rows}") {
            return Err(Error::Parse(format!("unexpected section header {head:?}")));
        }
        let vals = parse_floats(&next_line()?, rows)?;
        params.biases[i] = Array1::from(vals);
    }
    Ok(TrainedModel {
        arch,
        params,
        train_history: Vec::new(),
        holdout_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_features(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
        FeatureMatrix {
            data,
            sigma: 0.0,
            seed,
        }
    }

    #[test]
    fn init_is_deterministic_and_standard_normal() {
        let arch = Architecture::default();
        let a = init_params(&arch, 7);
        let b = init_params(&arch, 7);
        assert_eq!(a, b);
        let c = init_params(&arch, 8);
        assert_ne!(a, c);

        assert_eq!(a.weights[0].dim(), (25, 5));
        assert_eq!(a.biases[0].len(), 25);

        // 10,000 pooled draws: mean within ±0.05, sd within [0.97, 1.03].
        let wide = Architecture::new(vec![100, 99, 1]).unwrap();
        let p = init_params(&wide, 42);
        let draws: Vec<f64> = p
            .weights
            .iter()
            .flat_map(|w| w.iter().cloned())
            .chain(p.biases.iter().flat_map(|b| b.iter().cloned()))
            .collect();
        assert!(draws.len() > 10_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.05, "sample mean {mean}");
        assert!((0.97..=1.03).contains(&sd), "sample sd {sd}");
    }

    #[test]
    fn zero_params_forward_gives_sigmoid_half_then_zero() {
        let arch = Architecture::default();
        let params = MlpParams::zeros_like(&arch);
        let trace = forward(&params, &[0.3, -0.2, 0.9, 0.0, 0.5]).unwrap();
        for a in &trace.activations[1..trace.activations.len() - 1] {
            for &v in a {
                assert_eq!(v, 0.5);
            }
        }
        assert_eq!(trace.output(), 0.0);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let arch = Architecture::default();
        let params = MlpParams::zeros_like(&arch);
        assert!(forward(&params, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_output_gradient_means_zero_parameter_gradients() {
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let params = init_params(&arch, 3);
        let trace = forward(&params, &[0.4, -0.7]).unwrap();
        let grads = backward(&params, &trace, 0.0);
        for w in &grads.weights {
            assert!(w.iter().all(|&v| v == 0.0));
        }
        for b in &grads.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    /// Central-difference check of every parameter on a [2,3,1] net.
    fn check_gradients(loss: &LossSpec, seed: u64) {
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let mut params = init_params(&arch, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let input = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let label = rng.gen_range(0.0..1.0);
        let weight = loss.needs_weights().then(|| rng.gen_range(0.5..5.0));

        let trace = forward(&params, &input).unwrap();
        // Kink guard for the non-smooth losses.
        let e: f64 = trace.output() - label;
        if matches!(loss, LossSpec::Mae | LossSpec::Quantile { .. }) && e.abs() < 1e-3 {
            return;
        }
        if let LossSpec::Huber { delta } = loss {
            if (e.abs() - delta).abs() < 1e-3 {
                return;
            }
        }
        let dj = loss_grad_elem(loss, trace.output(), label, weight);
        let grads = backward(&params, &trace, dj);

        let h = 1e-5;
        let eval = |params: &MlpParams| {
            let t = forward(params, &input).unwrap();
            let w = weight.map(|w| vec![w]);
            loss_value(loss, &[t.output()], &[label], w.as_deref()).unwrap()
        };
        for layer in 0..params.weights.len() {
            for r in 0..params.weights[layer].nrows() {
                for c in 0..params.weights[layer].ncols() {
                    let orig = params.weights[layer][(r, c)];
                    params.weights[layer][(r, c)] = orig + h;
                    let up = eval(&params);
                    params.weights[layer][(r, c)] = orig - h;
                    let down = eval(&params);
                    params.weights[layer][(r, c)] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = grads.weights[layer][(r, c)];
                    let denom = numeric.abs().max(analytic.abs()).max(1e-7);
                    assert!(
                        ((numeric - analytic) / denom).abs() < 1e-5,
                        "{loss:?} W[{layer}][{r},{c}]: numeric {numeric} vs analytic {analytic}"
                    );
                }
            }
            for r in 0..params.biases[layer].len() {
                let orig = params.biases[layer][r];
                params.biases[layer][r] = orig + h;
                let up = eval(&params);
                params.biases[layer][r] = orig - h;
                let down = eval(&params);
                params.biases[layer][r] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.biases[layer][r];
                let denom = numeric.abs().max(analytic.abs()).max(1e-7);
                assert!(
                    ((numeric - analytic) / denom).abs() < 1e-5,
                    "{loss:?} b[{layer}][{r}]: numeric {numeric} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn backprop_matches_central_differences_for_every_loss() {
        let losses = [
            LossSpec::Mse,
            LossSpec::Mae,
            LossSpec::Huber { delta: 0.5 },
            LossSpec::LogCosh,
            LossSpec::Quantile { gamma: 0.25 },
            LossSpec::Wes { beta: 8.0 },
        ];
        for loss in losses {
            for seed in 0..5 {
                check_gradients(&loss, seed);
            }
        }
    }

    #[test]
    fn batched_gradient_equals_mean_of_single_sample_gradients() {
        let arch = Architecture::new(vec![3, 4, 1]).unwrap();
        let params = init_params(&arch, 11);
        let features = tiny_features(4, 3, 5);
        let labels = [0.2, 0.9, 0.4, 0.6];
        let loss = LossSpec::Mse;

        // Batched path.
        let idx: Vec<usize> = (0..4).collect();
        let block = gather_columns(&features, &idx);
        let acts = forward_batch(&params, &block);
        let out = acts.last().unwrap().row(0).to_owned();
        let dj =
            Array1::from_iter((0..4).map(|i| loss_grad_elem(&loss, out[i], labels[i], None) / 4.0));
        let batched = backward_batch(&params, &acts, &dj);

        // Mean of the four single-sample gradients.
        let mut summed = MlpParams::zeros_like(&arch);
        for (i, &label) in labels.iter().enumerate() {
            let row: Vec<f64> = features.data.row(i).to_vec();
            let trace = forward(&params, &row).unwrap();
            let g = backward(
                &params,
                &trace,
                loss_grad_elem(&loss, trace.output(), label, None) / 4.0,
            );
            for l in 0..summed.weights.len() {
                summed.weights[l] += &g.weights[l];
                summed.biases[l] += &g.biases[l];
            }
        }
        for l in 0..summed.weights.len() {
            for (a, b) in batched.weights[l].iter().zip(summed.weights[l].iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            for (a, b) in batched.biases[l].iter().zip(summed.biases[l].iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let mut params = MlpParams::zeros_like(&arch);
        let mut state = AdamState::new(&arch);
        let mut grads = MlpParams::zeros_like(&arch);
        grads.weights[0][(0, 0)] = 3.7;
        grads.weights[0][(1, 1)] = -0.004;
        adam_step(&mut state, &mut params, &grads, 0.01);
        // Bias-corrected m̂/√v̂ is ±1 (up to ε) on the first step.
        assert_abs_diff_eq!(params.weights[0][(0, 0)], -0.01, epsilon = 1e-6);
        assert_abs_diff_eq!(params.weights[0][(1, 1)], 0.01, epsilon = 1e-6);
        // Untouched parameters stay put.
        assert_eq!(params.weights[0][(0, 1)], 0.0);
        assert_eq!(params.biases[0][0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let mut params = init_params(&arch, 9);
        let before = params.clone();
        let mut state = AdamState::new(&arch);
        let grads = MlpParams::zeros_like(&arch);
        adam_step(&mut state, &mut params, &grads, 0.01);
        assert_eq!(params, before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let features = tiny_features(300, 5, 21);
        let labels: Vec<f64> = (0..300).map(|i| (i as f64 / 300.0).sin().abs()).collect();
        let config = TrainConfig {
            epochs: 3,
            seed: 77,
            ..TrainConfig::default()
        };
        let m1 = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();
        let m2 = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(m1.train_history, m2.train_history);
        assert_eq!(m1.holdout_history, m2.holdout_history);
    }

    #[test]
    fn training_reduces_loss_across_seeds() {
        for seed in 0..5 {
            let features = tiny_features(600, 5, 1000 + seed);
            // Labels depend on the features, so there is signal to learn.
            let labels: Vec<f64> = (0..600)
                .map(|i| {
                    let r = features.data.row(i);
                    0.5 + 0.3 * r[0] + 0.2 * r[1] * r[2]
                })
                .collect();
            let config = TrainConfig {
                epochs: 40,
                batch_size: 64,
                seed,
                holdout_fraction: 0.0,
                ..TrainConfig::default()
            };
            let model = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();
            let first = model.train_history[0];
            let last = *model.train_history.last().unwrap();
            assert!(
                last < first,
                "seed {seed}: loss went from {first} to {last}"
            );
        }
    }

    #[test]
    fn holdout_history_tracks_configured_fraction() {
        let features = tiny_features(200, 5, 3);
        let labels: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let config = TrainConfig {
            epochs: 2,
            holdout_fraction: 0.25,
            ..TrainConfig::default()
        };
        let model = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();
        assert_eq!(model.holdout_history.len(), 2);

        let config = TrainConfig {
            epochs: 2,
            holdout_fraction: 0.0,
            ..TrainConfig::default()
        };
        let model = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();
        assert!(model.holdout_history.is_empty());
    }

    #[test]
    fn config_validation() {
        let features = tiny_features(50, 5, 3);
        let labels = vec![0.5; 50];
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&features, &labels, &LossSpec::Mse, None, &bad).is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&features, &labels, &LossSpec::Mse, None, &bad).is_err());
        let bad = TrainConfig {
            holdout_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(train(&features, &labels, &LossSpec::Mse, None, &bad).is_err());
        // WES without weights is a configuration error.
        assert!(train(
            &features,
            &labels,
            &LossSpec::Wes { beta: 2.0 },
            None,
            &TrainConfig::default()
        )
        .is_err());
    }

    #[test]
    fn model_text_round_trip() {
        let features = tiny_features(100, 5, 13);
        let labels: Vec<f64> = (0..100)
            .map(|i| (i as f64 * 0.01).cos() * 0.5 + 0.5)
            .collect();
        let config = TrainConfig {
            epochs: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        let model = train(&features, &labels, &LossSpec::Mse, None, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.arch, model.arch);
        assert_eq!(loaded.params, model.params);

        // Predictions agree exactly after the round trip.
        let p1 = predict(&model, &features).unwrap();
        let p2 = predict(&loaded, &features).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "not a model\n").unwrap();
        assert!(load_model(&path).is_err());
        std::fs::write(&path, "wes-model v1\nlayers 2 x 1\n").unwrap();
        assert!(load_model(&path).is_err());
        assert!(load_model(&dir.path().join("missing.txt")).is_err());
    }

    #[test]
    fn predict_rejects_wrong_width_and_never_clips() {
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let mut params = MlpParams::zeros_like(&arch);
        // Force an output far outside [0, 1].
        params.biases[1][0] = 7.5;
        let model = TrainedModel {
            arch,
            params,
            train_history: vec![],
            holdout_history: vec![],
        };
        let features = tiny_features(10, 2, 1);
        let preds = predict(&model, &features).unwrap();
        assert!(preds.iter().all(|&p| (p - 7.5).abs() < 1e-12));

        let wrong = tiny_features(10, 3, 1);
        assert!(predict(&model, &wrong).is_err());
    }
}
