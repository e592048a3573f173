//! Minibatch training loop.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::network::{Gradients, Mlp};
use crate::neural::optim::{Adam, AdamConfig};
use crate::neural::schedule::{PlateauEvent, PlateauSchedule};
use crate::sampling::dataset::sample_rng;
use crate::scalar::Scalar;

/// Rows evaluated per chunk when computing a loss without gradients.
const EVAL_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub initial_lr: f64,
    pub plateau_factor: f64,
    /// Epochs without relative improvement before the rate is cut.
    pub plateau_patience: usize,
    /// Relative improvement that counts as progress.
    pub plateau_min_delta: f64,
    pub min_lr: f64,
    /// Epochs without any validation improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: 200,
            initial_lr: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 10,
            plateau_min_delta: 1e-3,
            min_lr: 1e-6,
            early_stop_patience: 40,
            seed: 0,
            validation_fraction: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::invalid("plateau_factor must lie in (0, 1)"));
        }
        if self.plateau_patience < 1 || self.early_stop_patience < 1 {
            return Err(Error::invalid("patience values must be at least 1"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size and max_epochs must be positive"));
        }
        if [self.initial_lr, self.min_lr].iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    LearningRateExhausted,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
    pub stop_reason: StopReason,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn lr_trace(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.lr).collect()
    }

    pub fn first_validation_mse(&self) -> f64 {
        self.epochs.first().map(|e| e.validation_mse).unwrap_or(f64::NAN)
    }
}

/// Something a network can be trained to minimize, indexed by sample.
pub trait Objective<T: Scalar> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean loss over `batch` and its gradient w.r.t. the network parameters.
    fn loss_and_gradient(&self, net: &Mlp<T>, batch: &[usize]) -> Result<(f64, Gradients<T>)>;

    /// Mean loss over `indices`.
    fn loss(&self, net: &Mlp<T>, indices: &[usize]) -> Result<f64>;
}

/// Mean of `(y - t)^2` over every element, and its gradient w.r.t. `y`.
pub fn mse_with_grad<T: Scalar>(y: &Array2<T>, t: ArrayView2<'_, T>) -> (f64, Array2<T>) {
    let n = T::lit(y.len() as f64);
    let diff = y - &t;
    let loss = diff.iter().map(|d| (*d * *d).as_f64()).sum::<f64>() / y.len() as f64;
    let grad = diff.mapv(|d| T::lit(2.0) * d / n);
    (loss, grad)
}

pub fn mse<T: Scalar>(y: ArrayView2<'_, T>, t: ArrayView2<'_, T>) -> f64 {
    let sum: f64 = y.iter().zip(t.iter()).map(|(a, b)| (*a - *b).as_f64().powi(2)).sum();
    sum / y.len() as f64
}

/// Averages a per-chunk mean loss over `indices`, weighting by chunk size.
pub fn chunked_loss(indices: &[usize], mut f: impl FnMut(&[usize]) -> Result<f64>) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::invalid("loss over an empty index set"));
    }
    let mut total = 0.0;
    for chunk in indices.chunks(EVAL_CHUNK) {
        total += f(chunk)? * chunk.len() as f64;
    }
    Ok(total / indices.len() as f64)
}

/// Supervised regression with MSE loss.
#[derive(Debug, Clone)]
pub struct Regression<T> {
    pub inputs: Array2<T>,
    pub targets: Array2<T>,
}

impl<T: Scalar> Regression<T> {
    pub fn new(inputs: Array2<T>, targets: Array2<T>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::invalid("inputs and targets differ in sample count"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(inputs)?, rows_to_array(targets)?)
    }
}

/// Stacks equal-length rows into a matrix.
pub fn rows_to_array<T: Scalar>(rows: &[Vec<f64>]) -> Result<Array2<T>> {
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::invalid("rows differ in length"));
    }
    let flat: Vec<T> = rows.iter().flatten().map(|&v| T::lit(v)).collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::invalid(e.to_string()))
}

impl<T: Scalar> Objective<T> for Regression<T> {
    fn len(&self) -> usize {
        self.inputs.nrows()
    }

    fn loss_and_gradient(&self, net: &Mlp<T>, batch: &[usize]) -> Result<(f64, Gradients<T>)> {
        let x = self.inputs.select(Axis(0), batch);
        let t = self.targets.select(Axis(0), batch);
        let cache = net.forward_batch(x.view())?;
        let (loss, grad) = mse_with_grad(&cache.output, t.view());
        let (grads, _) = net.backward_batch(&cache, grad.view())?;
        Ok((loss, grads))
    }

    fn loss(&self, net: &Mlp<T>, indices: &[usize]) -> Result<f64> {
        chunked_loss(indices, |chunk| {
            let y = net.predict_batch(self.inputs.select(Axis(0), chunk).view())?;
            Ok(mse(y.view(), self.targets.select(Axis(0), chunk).view()))
        })
    }
}

/// Train/validation partition of sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl DataSplit {
    /// Shuffles `0..n` with `seed` and holds out the last `fraction`.
    pub fn random(n: usize, fraction: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("need at least two samples to split"));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut sample_rng(seed, u64::MAX));
        let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        let validation = idx.split_off(n - n_val);
        Ok(Self { train: idx, validation })
    }
}

/// Minimizes `objective` over `split.train`, monitoring `split.validation`.
///
/// Returns the report; `net` holds the best-validation weights on return.
pub fn train<T: Scalar, O: Objective<T> + ?Sized>(
    net: &mut Mlp<T>,
    objective: &O,
    split: &DataSplit,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if objective.is_empty() || split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::Training("empty training or validation set".into()));
    }
    if let Some(&bad) = split
        .train
        .iter()
        .chain(&split.validation)
        .find(|&&i| i >= objective.len())
    {
        return Err(Error::invalid(format!("sample index {bad} out of range")));
    }
    let start = Instant::now();
    let mut optimizer = Adam::new(net, config.adam);
    let mut schedule = PlateauSchedule::new(
        config.initial_lr,
        config.plateau_factor,
        config.plateau_patience,
        config.plateau_min_delta,
        config.min_lr,
    );
    let mut order = split.train.clone();
    let mut rng = sample_rng(config.seed, 1 << 32);
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut epochs = Vec::new();
    let mut since_best = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..config.max_epochs {
        let lr = schedule.lr();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = objective.loss_and_gradient(net, batch)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite training loss at epoch {epoch}")));
            }
            optimizer
                .step(net, &grads, T::lit(lr))
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            sum += loss * batch.len() as f64;
        }
        let train_mse = sum / order.len() as f64;
        let validation_mse = objective.loss(net, &split.validation)?;
        if !validation_mse.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        epochs.push(EpochRecord {
            epoch,
            train_mse,
            validation_mse,
            lr,
        });
        log::debug!("epoch {epoch}: train {train_mse:.3e} val {validation_mse:.3e} lr {lr:.2e}");

        if validation_mse < best.0 {
            best = (validation_mse, epoch, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if schedule.observe(validation_mse) == PlateauEvent::Exhausted {
            stop_reason = StopReason::LearningRateExhausted;
            break;
        }
        if since_best >= config.early_stop_patience {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    let (best_validation_mse, best_epoch, best_net) = best;
    *net = best_net;
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_validation_mse,
        stop_reason,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
