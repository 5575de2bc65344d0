//! Loss functions: value and gradient with respect to the prediction.
//!
//! Six families are provided — MSE, MAE, Huber(δ), log-cosh, quantile(γ),
//! and WES(β). All batch losses are means over per-sample terms. Gradients
//! use the error convention `e = ŷ − y`; per-element gradients are returned
//! unnormalized, and the trainer divides by the batch size when forming the
//! batch gradient.
//!
//! Two identities pin the conventions down:
//! - quantile loss at γ = 0.5 is exactly half the MAE;
//! - WES keeps its printed ½ factor, so a constant weight `g ≡ c = 1`
//!   makes WES exactly half the MSE (which carries no ½).

use crate::{Error, Result};

/// A loss function identifier with its hyperparameters.
///
/// `Wes` carries only β; the weighting curve is estimated from the labels
/// and supplied to [`loss_value`] as a precomputed `g(y_i)` vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    Mse,
    Mae,
    Huber { delta: f64 },
    LogCosh,
    Quantile { gamma: f64 },
    Wes { beta: f64 },
}

impl LossSpec {
    /// Short string id used in configs and result records:
    /// `mse`, `mae`, `huber:0.5`, `logcosh`, `quantile:0.25`, `wes:8`.
    pub fn id(&self) -> String {
        match self {
            LossSpec::Mse => "mse".into(),
            LossSpec::Mae => "mae".into(),
            LossSpec::Huber { delta } => format!("huber:{delta}"),
            LossSpec::LogCosh => "logcosh".into(),
            LossSpec::Quantile { gamma } => format!("quantile:{gamma}"),
            LossSpec::Wes { beta } => format!("wes:{beta}"),
        }
    }

    /// Loss name without hyperparameters (the `loss` column of result rows).
    pub fn family(&self) -> &'static str {
        match self {
            LossSpec::Mse => "mse",
            LossSpec::Mae => "mae",
            LossSpec::Huber { .. } => "huber",
            LossSpec::LogCosh => "logcosh",
            LossSpec::Quantile { .. } => "quantile",
            LossSpec::Wes { .. } => "wes",
        }
    }

    /// β for WES variants, `None` otherwise.
    pub fn beta(&self) -> Option<f64> {
        match self {
            LossSpec::Wes { beta } => Some(*beta),
            _ => None,
        }
    }

    /// True when per-sample weights `g(y_i)` are required.
    pub fn needs_weights(&self) -> bool {
        matches!(self, LossSpec::Wes { .. })
    }

    /// Sort rank used for canonical result ordering: family order first,
    /// then the hyperparameter value.
    pub fn sort_key(&self) -> (u8, f64) {
        match self {
            LossSpec::Mse => (0, 0.0),
            LossSpec::Mae => (1, 0.0),
            LossSpec::Huber { delta } => (2, *delta),
            LossSpec::LogCosh => (3, 0.0),
            LossSpec::Quantile { gamma } => (4, *gamma),
            LossSpec::Wes { beta } => (5, *beta),
        }
    }
}

impl std::fmt::Display for LossSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

impl std::str::FromStr for LossSpec {
    type Err = Error;

    /// Parse a loss id. `huber`, `quantile`, and `wes` take their parameter
    /// after a colon (`huber:5`, `quantile:0.25`, `wes:8`); a bare `wes` is
    /// rejected here because the β grid is expanded at the config level.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let parse_param = |what: &str| -> Result<f64> {
            let raw = param.ok_or_else(|| {
                Error::Config(format!(
                    "loss {name:?} requires a parameter, e.g. {name}:{what}"
                ))
            })?;
            raw.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid {name} parameter {raw:?}")))
        };
        match name.to_ascii_lowercase().as_str() {
            "mse" => Ok(LossSpec::Mse),
            "mae" => Ok(LossSpec::Mae),
            "huber" => {
                let delta = parse_param("0.5")?;
                if delta <= 0.0 {
                    return Err(Error::Config(format!(
                        "huber delta must be positive, got {delta}"
                    )));
                }
                Ok(LossSpec::Huber { delta })
            }
            "logcosh" | "log-cosh" => Ok(LossSpec::LogCosh),
            "quantile" => {
                let gamma = parse_param("0.25")?;
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::Config(format!(
                        "quantile gamma must lie in (0, 1), got {gamma}"
                    )));
                }
                Ok(LossSpec::Quantile { gamma })
            }
            "wes" => {
                let beta = parse_param("8")?;
                Ok(LossSpec::Wes { beta })
            }
            other => Err(Error::Config(format!(
                "unknown loss {other:?}; expected mse, mae, huber:<delta>, \
                 logcosh, quantile:<gamma>, or wes:<beta>"
            ))),
        }
    }
}

/// Numerically stable `ln cosh(e) = |e| + ln(1 + exp(−2|e|)) − ln 2`,
/// immune to overflow for large `|e|`.
fn ln_cosh(e: f64) -> f64 {
    let a = e.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Per-element loss term (before the batch mean).
fn elem_value(spec: &LossSpec, pred: f64, label: f64, weight: Option<f64>) -> f64 {
    let e = pred - label;
    match spec {
        LossSpec::Mse => e * e,
        LossSpec::Mae => e.abs(),
        LossSpec::Huber { delta } => {
            if e.abs() <= *delta {
                0.5 * e * e
            } else {
                delta * e.abs() - 0.5 * delta * delta
            }
        }
        LossSpec::LogCosh => ln_cosh(e),
        LossSpec::Quantile { gamma } => {
            if e > 0.0 {
                (1.0 - gamma) * e
            } else {
                gamma * -e
            }
        }
        LossSpec::Wes { .. } => 0.5 * e * e * weight.expect("validated by caller"),
    }
}

/// Batch-mean loss over aligned prediction/label slices.
///
/// WES requires `weights` (the precomputed `g(y_i)` values, aligned with the
/// labels); other losses ignore it.
pub fn loss_value(
    spec: &LossSpec,
    preds: &[f64],
    labels: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Shape(format!(
            "need equal nonzero lengths, got {} predictions and {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if spec.needs_weights() {
        match weights {
            None => {
                return Err(Error::Config(
                    "WES loss requires precomputed per-label weights".into(),
                ))
            }
            Some(w) if w.len() != labels.len() => {
                return Err(Error::Shape(format!(
                    "weights length {} does not match labels length {}",
                    w.len(),
                    labels.len()
                )))
            }
            Some(_) => {}
        }
    }
    let n = preds.len();
    let mut acc = 0.0;
    for i in 0..n {
        let w = weights.map(|w| w[i]);
        acc += elem_value(spec, preds[i], labels[i], w);
    }
    Ok(acc / n as f64)
}

/// Per-element gradient `d/dŷ` of the loss term, with `e = ŷ − y`.
///
/// Returned without the `1/N` batch factor; the trainer applies it. At the
/// non-differentiable points (MAE and quantile at `e = 0`) the deterministic
/// zero subgradient is returned.
pub fn loss_grad_elem(spec: &LossSpec, pred: f64, label: f64, weight: Option<f64>) -> f64 {
    let e = pred - label;
    match spec {
        LossSpec::Mse => 2.0 * e,
        LossSpec::Mae => {
            if e == 0.0 {
                0.0
            } else {
                e.signum()
            }
        }
        LossSpec::Huber { delta } => {
            if e.abs() <= *delta {
                e
            } else {
                delta * e.signum()
            }
        }
        LossSpec::LogCosh => e.tanh(),
        LossSpec::Quantile { gamma } => {
            if e > 0.0 {
                1.0 - gamma
            } else if e < 0.0 {
                -gamma
            } else {
                0.0
            }
        }
        LossSpec::Wes { .. } => e * weight.expect("validated by caller"),
    }
}
