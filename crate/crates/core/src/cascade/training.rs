//! Forward regression and inverse training through the frozen forward net.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::layout;
use crate::error::{Error, Result};
use crate::neural::network::{Activation, Mlp, ModelMeta, ScalingConstants};
use crate::neural::serialize::model_hash;
use crate::neural::train::{
    chunked_loss, mse, mse_with_grad, rows_to_array, train, DataSplit, Objective, Regression, TrainConfig, TrainReport,
};
use crate::neural::{layer_dims, Gradients, DEFAULT_HIDDEN_LAYERS, DEFAULT_HIDDEN_WIDTH};
use crate::sampling::dataset::{sample_rng, Dataset};
use crate::sampling::normalize::RangeConstraint;
use crate::sampling::parameter_names;
use crate::sampling::registry::registry;
use crate::scalar::Scalar;
use crate::stage::{Scheme, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub hidden_layers: usize,
    pub width: usize,
    pub init_seed: u64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden_layers: DEFAULT_HIDDEN_LAYERS,
            width: DEFAULT_HIDDEN_WIDTH,
            init_seed: 0,
        }
    }
}

/// Everything needed to train one network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub architecture: Architecture,
    pub train: TrainConfig,
    /// Inverse training only: extra rows, as a fraction of the dataset,
    /// whose window for one parameter excludes the true value.
    pub infeasible_windows: f64,
}

/// Random stream offset of the infeasible-window rows.
const INFEASIBLE_STREAM: u64 = 1 << 40;

fn meta(stage: Stage, scheme: Scheme) -> ModelMeta {
    ModelMeta {
        stage: Some(stage),
        scheme: Some(scheme),
        parameter_order: parameter_names(stage),
        scaling_constants: ScalingConstants::default(),
    }
}

fn check_dataset(ds: &Dataset, stage: Stage) -> Result<()> {
    if ds.stage() != stage {
        return Err(Error::invalid(format!(
            "dataset holds {} samples, {stage} requested",
            ds.stage()
        )));
    }
    if ds.meta.parameter_order != parameter_names(stage) {
        return Err(Error::invalid("dataset parameter order does not match the registry"));
    }
    if ds.len() < 2 {
        return Err(Error::invalid("dataset needs at least two samples"));
    }
    Ok(())
}

pub fn forward_task<T: Scalar>(ds: &Dataset) -> Result<Regression<T>> {
    let stage = ds.stage();
    let x: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.forward_input(stage)).collect();
    let y: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.curve.clone()).collect();
    Regression::new(rows_to_array(&x)?, rows_to_array(&y)?)
}

/// A fresh, untrained forward network for `stage`.
pub fn new_forward<T: Scalar>(stage: Stage, scheme: Scheme, arch: &Architecture) -> Result<Mlp<T>> {
    let dims = layer_dims(
        layout::forward_input_len(stage),
        arch.hidden_layers,
        arch.width,
        stage.curve_len(),
    );
    Ok(Mlp::init(&dims, Activation::Relu, Activation::Linear, arch.init_seed)?.with_meta(meta(stage, scheme)))
}

/// A fresh, untrained inverse network for `stage`.
pub fn new_inverse<T: Scalar>(stage: Stage, scheme: Scheme, arch: &Architecture) -> Result<Mlp<T>> {
    let dims = layer_dims(
        layout::inverse_input_len(stage),
        arch.hidden_layers,
        arch.width,
        layout::n_params(stage),
    );
    Ok(Mlp::init(&dims, Activation::Relu, Activation::Sigmoid, arch.init_seed)?.with_meta(meta(stage, scheme)))
}

/// Supervised regression from the forward layout to scaled curves.
///
/// The validation split is drawn from `config.train.seed`.
pub fn train_forward<T: Scalar>(stage: Stage, ds: &Dataset, config: &NetConfig) -> Result<(Mlp<T>, TrainReport)> {
    check_dataset(ds, stage)?;
    let task = forward_task::<T>(ds)?;
    let split = DataSplit::random(ds.len(), config.train.validation_fraction, config.train.seed)?;
    let mut net = new_forward(stage, ds.scheme(), &config.architecture)?;
    let report = train(&mut net, &task, &split, &config.train)?;
    Ok((net, report))
}

/// Reconstruction loss of an inverse net cascaded into a frozen forward net.
///
/// Parameters pinned by a zero-width window are fed to the forward net as
/// 0.5, the value it saw for them in training; their inverse outputs get no
/// gradient.
pub struct ReconstructionObjective<'a, T> {
    pub forward: &'a Mlp<T>,
    /// Inverse inputs; the first `curve_len` columns are the target curve.
    pub inputs: Array2<T>,
    /// 1 where a parameter is free, 0 where its window is degenerate.
    pub free: Array2<T>,
    curve_len: usize,
}

impl<'a, T: Scalar> ReconstructionObjective<'a, T> {
    pub fn new(forward: &'a Mlp<T>, ds: &Dataset) -> Result<Self> {
        let stage = ds.stage();
        if forward.input_dim() != layout::forward_input_len(stage) || forward.output_dim() != stage.curve_len() {
            return Err(Error::invalid(format!(
                "forward net dims {:?} do not fit the {stage} layout",
                forward.dims()
            )));
        }
        let specs = registry(stage);
        let x: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.inverse_input(stage)).collect();
        let free: Vec<Vec<f64>> = ds
            .samples
            .iter()
            .map(|s| {
                specs
                    .iter()
                    .zip(&s.ranges)
                    .map(|(spec, c)| if c.is_fixed(spec) { 0.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        Ok(Self {
            forward,
            inputs: rows_to_array(&x)?,
            free: rows_to_array(&free)?,
            curve_len: stage.curve_len(),
        })
    }

    /// Forward-net input for inverse outputs `p` on rows `batch`.
    fn cascade_input(&self, p: &Array2<T>, batch: &[usize]) -> Array2<T> {
        let x = self.inputs.select(Axis(0), batch);
        let free = self.free.select(Axis(0), batch);
        let half = T::lit(0.5);
        let pinned = p * &free + &free.mapv(|f| (T::one() - f) * half);
        let cond = x.slice(s![.., self.curve_len..]);
        ndarray::concatenate(Axis(1), &[pinned.view(), cond]).expect("row counts agree")
    }

    /// Reconstructed scaled curves for `batch`.
    pub fn reconstruct(&self, inverse: &Mlp<T>, batch: &[usize]) -> Result<Array2<T>> {
        let x = self.inputs.select(Axis(0), batch);
        let p = inverse.predict_batch(x.view())?;
        self.forward.predict_batch(self.cascade_input(&p, batch).view())
    }

    /// Per-row reconstruction MSE.
    pub fn row_losses(&self, inverse: &Mlp<T>, indices: &[usize]) -> Result<Vec<f64>> {
        let y = self.reconstruct(inverse, indices)?;
        let t = self.inputs.select(Axis(0), indices);
        Ok(y.outer_iter()
            .zip(t.outer_iter())
            .map(|(yr, tr)| {
                yr.iter()
                    .zip(tr.iter().take(self.curve_len))
                    .map(|(a, b)| (*a - *b).as_f64().powi(2))
                    .sum::<f64>()
                    / self.curve_len as f64
            })
            .collect())
    }

    /// Appends `round(fraction * n)` rows that reuse a dataset curve with
    /// one free parameter's window moved entirely to one side of its true
    /// value. Reconstruction alone then teaches the net to press against
    /// the window edge nearest the truth.
    pub fn with_infeasible(mut self, ds: &Dataset, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::invalid("infeasible_windows must lie in [0, 1]"));
        }
        let stage = ds.stage();
        let specs = registry(stage);
        let m = (fraction * ds.len() as f64).round() as usize;
        let mut x = Vec::with_capacity(m);
        let mut free = Vec::with_capacity(m);
        for i in 0..m {
            let mut rng = sample_rng(seed, INFEASIBLE_STREAM + i as u64);
            let sample = &ds.samples[rng.random_range(0..ds.len())];
            let j = rng.random_range(0..specs.len());
            let (spec, v) = (&specs[j], sample.params[j]);
            let room_below = v - spec.global_min > 1e-3 * spec.span();
            let room_above = spec.global_max - v > 1e-3 * spec.span();
            let below = match (room_below, room_above) {
                (true, true) => rng.random::<bool>(),
                (b, a) if b || a => b,
                _ => continue,
            };
            let (lo, hi) = if below {
                (spec.global_min, v)
            } else {
                (v, spec.global_max)
            };
            let a = lo + rng.random::<f64>() * (hi - lo);
            let b = lo + rng.random::<f64>() * (hi - lo);
            let mut ranges = sample.ranges.clone();
            ranges[j] = RangeConstraint::new(a.min(b).max(lo), a.max(b).min(hi));
            if ranges[j].contains(v) || ranges[j].is_degenerate(spec.span()) {
                continue;
            }
            x.push(layout::inverse_input(stage, &sample.curve, &ranges, sample.phig));
            free.push(
                specs
                    .iter()
                    .zip(&ranges)
                    .map(|(sp, c)| if c.is_fixed(sp) { 0.0 } else { 1.0 })
                    .collect::<Vec<f64>>(),
            );
        }
        if !x.is_empty() {
            let x: Array2<T> = rows_to_array(&x)?;
            let free: Array2<T> = rows_to_array(&free)?;
            self.inputs = ndarray::concatenate(Axis(0), &[self.inputs.view(), x.view()]).expect("same width");
            self.free = ndarray::concatenate(Axis(0), &[self.free.view(), free.view()]).expect("same width");
        }
        Ok(self)
    }

    /// Rows whose window pins at least one parameter.
    pub fn degenerate_rows(&self, indices: &[usize]) -> Vec<usize> {
        indices
            .iter()
            .copied()
            .filter(|&i| self.free.row(i).iter().any(|f| *f == T::zero()))
            .collect()
    }
}

impl<T: Scalar> Objective<T> for ReconstructionObjective<'_, T> {
    fn len(&self) -> usize {
        self.inputs.nrows()
    }

    fn loss_and_gradient(&self, inverse: &Mlp<T>, batch: &[usize]) -> Result<(f64, Gradients<T>)> {
        let x = self.inputs.select(Axis(0), batch);
        let inv_cache = inverse.forward_batch(x.view())?;
        let fwd_cache = self
            .forward
            .forward_batch(self.cascade_input(&inv_cache.output, batch).view())?;
        let (loss, dy) = mse_with_grad(&fwd_cache.output, x.slice(s![.., ..self.curve_len]));
        let d_in = self.forward.input_gradient(&fwd_cache, dy.view())?;
        let n_par = inverse.output_dim();
        let dp = &d_in.slice(s![.., ..n_par]) * &self.free.select(Axis(0), batch);
        let (grads, _) = inverse.backward_batch(&inv_cache, dp.view())?;
        Ok((loss, grads))
    }

    fn loss(&self, inverse: &Mlp<T>, indices: &[usize]) -> Result<f64> {
        chunked_loss(indices, |chunk| {
            let y = self.reconstruct(inverse, chunk)?;
            let t = self.inputs.select(Axis(0), chunk);
            Ok(mse(y.view(), t.slice(s![.., ..self.curve_len])))
        })
    }
}

/// Trains an inverse net against a frozen forward net by curve reconstruction.
///
/// The dataset's true parameters are never used as targets.
pub fn train_inverse<T: Scalar>(forward: &Mlp<T>, ds: &Dataset, config: &NetConfig) -> Result<(Mlp<T>, TrainReport)> {
    if !forward.is_frozen() {
        return Err(Error::invalid("forward net must be frozen before inverse training"));
    }
    let stage = ds.stage();
    check_dataset(ds, stage)?;
    if forward.meta.stage.is_some_and(|s| s != stage) {
        return Err(Error::invalid("forward net was trained for another stage"));
    }
    let mut objective = ReconstructionObjective::new(forward, ds)?;
    if config.infeasible_windows > 0.0 {
        objective = objective.with_infeasible(ds, config.infeasible_windows, config.train.seed)?;
    }
    let split = DataSplit::random(objective.len(), config.train.validation_fraction, config.train.seed)?;
    let mut net = new_inverse(stage, ds.scheme(), &config.architecture)?;
    let report = train(&mut net, &objective, &split, &config.train)?;
    Ok((net, report))
}

/// Both networks of one stage plus their training records.
#[derive(Debug, Clone)]
pub struct TrainedCascade<T> {
    pub forward: Mlp<T>,
    pub inverse: Mlp<T>,
    pub forward_report: TrainReport,
    pub inverse_report: TrainReport,
    /// Forward-net content hash right after freezing.
    pub forward_hash_frozen: String,
    /// Forward-net content hash after inverse training.
    pub forward_hash_after: String,
}

/// Forward training, freeze, inverse training on the same dataset.
pub fn train_cascade<T: Scalar>(
    ds: &Dataset,
    forward_cfg: &NetConfig,
    inverse_cfg: &NetConfig,
) -> Result<TrainedCascade<T>> {
    let (mut forward, forward_report) = train_forward::<T>(ds.stage(), ds, forward_cfg)?;
    forward.freeze();
    let forward_hash_frozen = model_hash(&forward)?;
    let (inverse, inverse_report) = train_inverse(&forward, ds, inverse_cfg)?;
    let forward_hash_after = model_hash(&forward)?;
    Ok(TrainedCascade {
        forward,
        inverse,
        forward_report,
        inverse_report,
        forward_hash_frozen,
        forward_hash_after,
    })
}
