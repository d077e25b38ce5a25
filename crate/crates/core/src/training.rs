//! Losses, optimizers and the minibatch training loop.
//!
//! Every minibatch forward pass draws fresh Brownian noise from a stream keyed
//! by `(seed, global step, sample)`, the backward pass reuses that noise, and
//! all parameters including `alpha` are updated by the same optimizer rule:
//! `alpha <- alpha - lr * dL/dalpha`.

use alloc::format;
use alloc::vec::Vec;

use crate::activation::ActivationKind;
use crate::data::SequenceDataset;
use crate::error::{invalid, Error, Result};
use crate::lstm::{backward_bptt, sequence_forward, Head, LstmParams, Noise, ParamGrads};
use crate::metrics;
use crate::numerics::{Matrix, RngStream};

const TRAIN_STREAM: u64 = 0x7EA1;
const EVAL_STREAM: u64 = 0xE7A1;
const SHUFFLE_STREAM: u64 = 0x5F1E;

pub const BCE_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Loss {
    Mse,
    Bce,
}

/// Brownian noise used when evaluating (validation and test predictions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvalNoise {
    /// Fresh seeded noise, as in training.
    #[default]
    Stochastic,
    /// Monte Carlo means replaced by their expectation.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub loss: Loss,
    pub eval_noise: EvalNoise,
    /// Global-norm clip applied to each minibatch gradient.
    pub grad_clip: Option<f64>,
    /// `false` freezes `alpha` (its gradient is masked).
    pub train_alpha: bool,
    pub shuffle: bool,
    /// Return the parameters from the epoch with the lowest validation loss.
    pub restore_best: bool,
    /// Abort when `|alpha|` exceeds this bound.
    pub alpha_limit: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 50,
            batch_size: 32,
            optimizer: Optimizer::adam(),
            patience: 5,
            min_delta: 1e-5,
            seed: 0,
            loss: Loss::Mse,
            eval_noise: EvalNoise::Stochastic,
            grad_clip: Some(5.0),
            train_alpha: true,
            shuffle: true,
            restore_best: true,
            alpha_limit: 1e3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.max_epochs == 0 {
            return Err(invalid!("max_epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid!("batch_size must be >= 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(invalid!("min_delta must be >= 0"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(invalid!("gradient clip must be > 0, got {c}"));
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(invalid!("invalid Adam hyperparameters"));
            }
        }
        Ok(())
    }
}

/// A model: parameters plus the fixed architecture choices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Model {
    pub params: LstmParams,
    pub activation: ActivationKind,
    pub head: Head,
}

impl Model {
    pub fn new(params: LstmParams, activation: ActivationKind, head: Head) -> Result<Self> {
        params.validate()?;
        activation.validate()?;
        Ok(Self {
            params,
            activation,
            head,
        })
    }

    /// Predictions for every sample in `data`.
    pub fn predict(&self, data: &SequenceDataset, noise: EvalNoise, seed: u64) -> Result<Vec<f64>> {
        let root = RngStream::new(seed, EVAL_STREAM);
        data.inputs
            .iter()
            .enumerate()
            .map(|(i, seq)| {
                let noise = match noise {
                    EvalNoise::Stochastic => Noise::Stream(root.substream(i as u64)),
                    EvalNoise::Mean => Noise::Expected,
                };
                let (y, _) =
                    sequence_forward(&self.params, seq, &self.activation, self.head, &noise)?;
                Ok(y.data()[0])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// R² on the training predictions seen during the epoch (regression) or
    /// their accuracy (classification).
    pub metric: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub epoch_of_convergence: usize,
    pub final_alpha: f64,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "loss",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    Ok(())
}

/// Mean squared error and its gradient `(2/N)(pred - target)`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_lengths(pred, target)?;
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, grad))
}

/// Mean binary cross-entropy with probabilities clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(prob: &[f64], label: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_lengths(prob, label)?;
    if let Some(y) = label.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(invalid!("labels must be 0 or 1, got {y}"));
    }
    let n = prob.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(prob.len());
    for (&p, &y) in prob.iter().zip(label) {
        let clipped = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        loss -= y * libm::log(clipped) + (1.0 - y) * libm::log(1.0 - clipped);
        // clipping makes the loss flat outside the interval
        let g = if p != clipped {
            0.0
        } else {
            (clipped - y) / (clipped * (1.0 - clipped))
        };
        grad.push(g / n);
    }
    Ok((loss / n, grad))
}

fn loss_fn(loss: Loss, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    match loss {
        Loss::Mse => mse_loss(pred, target),
        Loss::Bce => bce_loss(pred, target),
    }
}

/// Moment estimates for Adam; unused by SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    first: Option<LstmParams>,
    second: Option<LstmParams>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self {
            step: 0,
            first: None,
            second: None,
        }
    }
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::new()
    }
}

fn check_same_layout(p: &LstmParams, g: &ParamGrads) -> Result<()> {
    for (a, b) in p.tensors().iter().zip(g.tensors()) {
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch {
                op: "optimizer_step",
                left: a.shape(),
                right: b.shape(),
            });
        }
    }
    Ok(())
}

/// Applies one update. `alpha` follows the same rule as every other scalar,
/// and is left alone when `config.train_alpha` is false.
pub fn optimizer_step(
    params: &mut LstmParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    check_same_layout(params, grads)?;
    let lr = config.learning_rate;
    let alpha_grad = if config.train_alpha { grads.alpha } else { 0.0 };
    state.step += 1;
    match config.optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                p.axpy(-lr, g);
            }
            params.alpha -= lr * alpha_grad;
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let m = state.first.get_or_insert_with(|| params.zeros_like());
            let v = state.second.get_or_insert_with(|| params.zeros_like());
            let t = state.step as i32;
            let bc1 = 1.0 - libm::pow(beta1, t as f64);
            let bc2 = 1.0 - libm::pow(beta2, t as f64);
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            };
            for (((p, g), m), v) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                for (((p, &g), m), v) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                {
                    update(p, g, m, v);
                }
            }
            update(&mut params.alpha, alpha_grad, &mut m.alpha, &mut v.alpha);
        }
    }
    Ok(())
}

/// Rescales `grads` so its global norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.sq_norm());
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Noise source for sample `sample` of global minibatch `step`.
pub fn batch_noise(seed: u64, step: u64, sample: u64) -> Noise {
    Noise::Stream(
        RngStream::new(seed, TRAIN_STREAM)
            .substream(step)
            .substream(sample),
    )
}

/// Sample order for a 1-based `epoch`: seeded Fisher-Yates, or the identity
/// when `shuffle` is false.
pub fn epoch_order(seed: u64, epoch: usize, n: usize, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = RngStream::new(seed, SHUFFLE_STREAM).substream(epoch as u64);
        for i in (1..n).rev() {
            let j = ((rng.next_uniform() * (i + 1) as f64) as usize).min(i);
            order.swap(i, j);
        }
    }
    order
}

/// Loss, summed gradient and predictions for one minibatch.
pub fn batch_gradient(
    model: &Model,
    data: &SequenceDataset,
    indices: &[usize],
    loss: Loss,
    seed: u64,
    step: u64,
) -> Result<(f64, ParamGrads, Vec<f64>)> {
    let mut preds = Vec::with_capacity(indices.len());
    let mut traces = Vec::with_capacity(indices.len());
    let mut targets = Vec::with_capacity(indices.len());
    for (pos, &i) in indices.iter().enumerate() {
        let noise = batch_noise(seed, step, pos as u64);
        let (y, trace) = sequence_forward(
            &model.params,
            &data.inputs[i],
            &model.activation,
            model.head,
            &noise,
        )?;
        preds.push(y.data()[0]);
        traces.push(trace);
        targets.push(data.targets[i]);
    }
    let (value, dl) = loss_fn(loss, &preds, &targets)?;
    let mut grads = model.params.zeros_like();
    for (trace, g) in traces.iter().zip(dl) {
        let sample_grads = backward_bptt(&model.params, trace, &Matrix::column(&[g]))?;
        grads.axpy(1.0, &sample_grads);
    }
    Ok((value, grads, preds))
}

fn epoch_metric(head: Head, preds: &[f64], targets: &[f64]) -> f64 {
    match head {
        Head::Regression => metrics::r2(preds, targets).unwrap_or(f64::NAN),
        Head::Classification => {
            let correct = preds
                .iter()
                .zip(targets)
                .filter(|(&p, &t)| (p >= 0.5) == (t == 1.0))
                .count();
            correct as f64 / preds.len() as f64
        }
    }
}

/// Minibatch training with early stopping on `validation` loss.
pub fn train(
    model: &mut Model,
    train_set: &SequenceDataset,
    validation: &SequenceDataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    model.params.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if config.loss == Loss::Bce && model.head != Head::Classification {
        return Err(invalid!("bce loss needs a classification head"));
    }

    let mut state = OptimizerState::new();
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, LstmParams)> = None;
    let mut since_best = 0usize;
    let mut step = 0u64;

    for epoch in 1..=config.max_epochs {
        let order = epoch_order(config.seed, epoch, train_set.len(), config.shuffle);
        let mut loss_sum = 0.0;
        let mut seen_preds = Vec::with_capacity(order.len());
        let mut seen_targets = Vec::with_capacity(order.len());
        for batch in order.chunks(config.batch_size) {
            let (value, mut grads, preds) =
                batch_gradient(model, train_set, batch, config.loss, config.seed, step)?;
            if !value.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite training loss at epoch {epoch}, step {step}"
                )));
            }
            loss_sum += value * batch.len() as f64;
            seen_preds.extend(preds);
            seen_targets.extend(batch.iter().map(|&i| train_set.targets[i]));
            if let Some(max_norm) = config.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            optimizer_step(&mut model.params, &grads, &mut state, config)?;
            step += 1;
            if !model.params.alpha.is_finite() || model.params.alpha.abs() > config.alpha_limit {
                return Err(Error::Diverged(format!(
                    "alpha reached {} at epoch {epoch} (limit {})",
                    model.params.alpha, config.alpha_limit
                )));
            }
            if !model.params.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite parameters at epoch {epoch}"
                )));
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_preds = model.predict(validation, config.eval_noise, config.seed)?;
        let (val_loss, _) = loss_fn(config.loss, &val_preds, &validation.targets)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            metric: epoch_metric(model.head, &seen_preds, &seen_targets),
            alpha: model.params.alpha,
        });

        match &best {
            Some((best_loss, _, _)) if val_loss >= *best_loss - config.min_delta => {
                since_best += 1;
            }
            _ => {
                best = Some((val_loss, epoch, model.params.clone()));
                since_best = 0;
            }
        }
        if since_best > config.patience {
            break;
        }
    }

    // lowest validation loss, first occurrence
    let epoch_of_convergence = epochs
        .iter()
        .fold((f64::INFINITY, 0usize), |(lo, at), r| {
            if r.val_loss < lo {
                (r.val_loss, r.epoch)
            } else {
                (lo, at)
            }
        })
        .1;
    if config.restore_best {
        if let Some((_, _, params)) = best {
            model.params = params;
        }
    }
    Ok(TrainHistory {
        epochs,
        epoch_of_convergence,
        final_alpha: model.params.alpha,
    })
}
