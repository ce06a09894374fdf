//! Neural classifiers trained by mini-batch backpropagation with Adam.

mod adam;
mod cnn;
mod fnn;

pub use adam::Adam;
pub use cnn::{conv2d, image_matrix, maxpool2x2, Cnn, CnnSpec, LayerShape};
pub use fnn::{Fnn, FnnSpec};

use gaitlab_core::GaitLabel;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("empty training data")]
    EmptyData,
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

pub(crate) fn shape_err(expected: impl ToString, got: impl ToString) -> NnError {
    NnError::ShapeMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 100,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: &str, v: f64| NnError::InvalidConfig(format!("{what} = {v}"));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad("learning_rate", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(bad("beta1", self.beta1));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(bad("beta2", self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return Err(bad("epsilon", self.epsilon));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size = 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch metrics. Training figures are running averages over the
/// epoch's mini-batches, measured before each update; validation figures are
/// measured after the epoch. Validation vectors stay empty without a
/// validation set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

/// Loss and gradients of one mini-batch. `grads` follows the order of
/// [`Network::params_mut`] and holds the gradient of the mean loss.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub correct: usize,
    pub grads: Vec<Vec<f64>>,
}

/// A classifier over row-vector inputs with trainable parameter tensors.
pub trait Network: Clone + Sync {
    fn input_dim(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
    /// Mean cross-entropy over the batch and its gradient.
    fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<BatchGradients, NnError>;
    /// Class probabilities, one row per input row.
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln p[label]`, with `ln 0` clamped to the smallest positive normal.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

/// Cross-entropy computed from logits via log-sum-exp.
pub(crate) fn logit_cross_entropy(z: &[f64], label: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    lse - z[label]
}

pub(crate) fn label_indices(y: &[GaitLabel]) -> Vec<usize> {
    y.iter().map(|l| l.index()).collect()
}

fn check_data<N: Network>(net: &N, x: ArrayView2<f64>, y: &[usize]) -> Result<(), NnError> {
    if x.nrows() != y.len() {
        return Err(shape_err(format!("{} labels", x.nrows()), y.len()));
    }
    if x.ncols() != net.input_dim() {
        return Err(shape_err(format!("{} input columns", net.input_dim()), x.ncols()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= net.n_classes()) {
        return Err(shape_err(format!("class < {}", net.n_classes()), bad));
    }
    Ok(())
}

/// Mean loss and accuracy of `net` on a labelled set.
pub fn evaluate<N: Network>(net: &N, x: ArrayView2<f64>, y: &[usize]) -> Result<(f64, f64), NnError> {
    check_data(net, x, y)?;
    if y.is_empty() {
        return Err(NnError::EmptyData);
    }
    let p = net.predict_proba(x)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (row, &label) in p.rows().into_iter().zip(y) {
        let row = row.to_vec();
        loss += cross_entropy(&row, label);
        correct += usize::from(crate::argmax(&row) == label);
    }
    Ok((loss / y.len() as f64, correct as f64 / y.len() as f64))
}

/// Trains `net` for `cfg.epochs` epochs. Each epoch reshuffles the training
/// rows with an RNG seeded once from `cfg.shuffle_seed`.
pub fn train<N: Network>(
    mut net: N,
    x: ArrayView2<f64>,
    y: &[GaitLabel],
    validation: Option<(ArrayView2<f64>, &[GaitLabel])>,
    cfg: &TrainConfig,
) -> Result<(N, History), NnError> {
    cfg.validate()?;
    let y = label_indices(y);
    check_data(&net, x, &y)?;
    if y.is_empty() {
        return Err(NnError::EmptyData);
    }
    let validation = match validation {
        Some((vx, vy)) => {
            let vy = label_indices(vy);
            check_data(&net, vx, &vy)?;
            if vy.is_empty() {
                return Err(NnError::EmptyData);
            }
            Some((vx, vy))
        }
        None => None,
    };

    let mut rng = gaitlab_core::seed::rng_from_seed(cfg.shuffle_seed);
    let mut adam = Adam::new(cfg, &net.params());
    let mut history = History::default();
    let mut order: Vec<usize> = (0..y.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.select(ndarray::Axis(0), batch);
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let g = net.loss_and_gradients(bx.view(), &by)?;
            loss_sum += g.loss * batch.len() as f64;
            correct += g.correct;
            adam.step(net.params_mut(), &g.grads);
        }
        history.train_loss.push(loss_sum / y.len() as f64);
        history.train_accuracy.push(correct as f64 / y.len() as f64);
        if let Some((vx, vy)) = &validation {
            let (l, a) = evaluate(&net, *vx, vy)?;
            history.val_loss.push(l);
            history.val_accuracy.push(a);
        }
    }
    Ok((net, history))
}

/// Central-difference gradient of the batch loss, for checking backprop.
#[cfg(test)]
pub(crate) fn numeric_gradients<N: Network>(net: &N, x: ArrayView2<f64>, y: &[usize], h: f64) -> Vec<Vec<f64>> {
    let mut probe = net.clone();
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut out = Vec::new();
    for (t, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + h;
            let plus = probe.loss_and_gradients(x, y).unwrap().loss;
            probe.params_mut()[t][i] = orig - h;
            let minus = probe.loss_and_gradients(x, y).unwrap().loss;
            probe.params_mut()[t][i] = orig;
            *gi = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all parameters.
#[cfg(test)]
pub(crate) fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>], floor: f64) -> f64 {
    analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
