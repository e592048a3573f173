use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::dataset::sample_rng;
use crate::scalar::{sigmoid, Scalar};
use crate::stage::{Scheme, Stage};
use crate::surrogate::{C_REF, I_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
}

impl Activation {
    fn apply<T: Scalar>(self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Linear => {}
            // Open interval: keep 0 and 1 unreachable in floating point.
            Activation::Sigmoid => {
                let hi = T::one() - T::epsilon() / T::lit(2.0);
                z.mapv_inplace(|v| sigmoid(v).max(T::min_positive_value()).min(hi))
            }
        }
    }
}

/// Curve scaling used to produce the network-space targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConstants {
    pub c_ref: f64,
    pub i_floor: f64,
    pub id_log_offset: f64,
    pub id_log_span: f64,
}

impl Default for ScalingConstants {
    fn default() -> Self {
        Self {
            c_ref: C_REF,
            i_floor: I_FLOOR,
            id_log_offset: 14.0,
            id_log_span: 12.0,
        }
    }
}

/// What a network was trained for.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    pub stage: Option<Stage>,
    pub scheme: Option<Scheme>,
    pub parameter_order: Vec<String>,
    pub scaling_constants: ScalingConstants,
}

/// Fully connected layer; `weights` is `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    pub activation: Activation,
    /// Frozen layers still propagate gradients but are never updated.
    pub frozen: bool,
}

impl<T: Scalar> Dense<T> {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// Gradients with the same shapes as a network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.biases.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> T {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Per-layer values retained by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input of every layer (index 0 is the network input).
    pub inputs: Vec<Array2<T>>,
    /// Pre-activations of every layer.
    pub pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

/// Dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    pub meta: ModelMeta,
}

impl<T: Scalar> Mlp<T> {
    /// Deterministic initialization.
    ///
    /// ReLU layers draw weights from `N(0, 2/fan_in)`; other layers from a
    /// uniform distribution with variance `1/fan_in`. Biases start at zero.
    pub fn init(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("a network needs at least input and output dimensions"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        let mut rng = sample_rng(seed, 0);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (fan_in, fan_out) = (dims[k], dims[k + 1]);
                let activation = if k + 1 == n { output } else { hidden };
                let weights = init_weights(fan_in, fan_out, activation, &mut rng);
                Dense {
                    weights: weights.mapv(T::lit),
                    biases: Array1::zeros(fan_out),
                    activation,
                    frozen: false,
                }
            })
            .collect();
        Ok(Self {
            layers,
            meta: ModelMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = meta;
        self
    }

    /// `[input, hidden.., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Dense::fan_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::fan_out).unwrap_or(0)
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn freeze(&mut self) {
        self.layers.iter_mut().for_each(|l| l.frozen = true);
    }

    pub fn unfreeze(&mut self) {
        self.layers.iter_mut().for_each(|l| l.frozen = false);
    }

    pub fn is_frozen(&self) -> bool {
        self.layers.iter().all(|l| l.frozen)
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Batched forward pass; rows are samples.
    pub fn forward_batch(&self, input: ArrayView2<'_, T>) -> Result<ForwardCache<T>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = input.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights);
            z += &layer.biases;
            let mut out = z.clone();
            layer.activation.apply(&mut out);
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        Ok(ForwardCache { inputs, pre, output: a })
    }

    /// Inference without keeping intermediates.
    pub fn predict_batch(&self, input: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut a = input.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights);
            z += &layer.biases;
            layer.activation.apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.predict_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Single-sample forward pass.
    pub fn forward_pass(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::invalid(e.to_string()))?;
        let cache = self.forward_batch(x)?;
        Ok((cache.output.row(0).to_vec(), cache))
    }

    /// Reverse-mode pass for a cache produced by this network.
    ///
    /// `output_grad` holds dL/d(output) per sample. Returns the parameter
    /// gradients summed over the batch together with dL/d(input).
    pub fn backward_batch(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
    ) -> Result<(Gradients<T>, Array2<T>)> {
        let (grads, input_grad) = self.backprop(cache, output_grad, true)?;
        Ok((grads.expect("parameter gradients requested"), input_grad))
    }

    /// dL/d(input) only; skips the weight-gradient products.
    pub fn input_gradient(&self, cache: &ForwardCache<T>, output_grad: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self.backprop(cache, output_grad, false)?.1)
    }

    pub fn backward_pass(&self, cache: &ForwardCache<T>, output_gradient: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
        let g = ArrayView2::from_shape((1, output_gradient.len()), output_gradient)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let (grads, input_grad) = self.backward_batch(cache, g)?;
        Ok((grads, input_grad.row(0).to_vec()))
    }

    fn backprop(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
        want_params: bool,
    ) -> Result<(Option<Gradients<T>>, Array2<T>)> {
        let n = self.layers.len();
        if cache.pre.len() != n || cache.inputs.len() != n {
            return Err(Error::invalid("forward cache does not match network depth"));
        }
        if output_grad.dim() != cache.output.dim() {
            return Err(Error::invalid(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.dim(),
                cache.output.dim()
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if cache.pre[k].ncols() != layer.fan_out() || cache.inputs[k].ncols() != layer.fan_in() {
                return Err(Error::invalid(format!(
                    "forward cache layer {k} does not match network"
                )));
            }
        }
        let mut dw = Vec::with_capacity(if want_params { n } else { 0 });
        let mut db = Vec::with_capacity(if want_params { n } else { 0 });
        let mut delta = output_grad.to_owned();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            match layer.activation {
                Activation::Linear => {}
                Activation::Relu => Zip::from(&mut delta).and(&cache.pre[k]).for_each(|d, &z| {
                    if z <= T::zero() {
                        *d = T::zero()
                    }
                }),
                Activation::Sigmoid => {
                    let post = if k + 1 == n {
                        &cache.output
                    } else {
                        &cache.inputs[k + 1]
                    };
                    Zip::from(&mut delta)
                        .and(post)
                        .for_each(|d, &s| *d = *d * s * (T::one() - s));
                }
            }
            if want_params {
                dw.push(cache.inputs[k].t().dot(&delta));
                db.push(delta.sum_axis(Axis(0)));
            }
            delta = delta.dot(&layer.weights.t());
        }
        let grads = want_params.then(|| {
            dw.reverse();
            db.reverse();
            Gradients {
                weights: dw,
                biases: db,
            }
        });
        Ok((grads, delta))
    }

    /// Converts every weight to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: l.weights.mapv(|v| U::lit(v.as_f64())),
                    biases: l.biases.mapv(|v| U::lit(v.as_f64())),
                    activation: l.activation,
                    frozen: l.frozen,
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

fn init_weights<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut R) -> Array2<f64> {
    let n = fan_in as f64;
    match activation {
        Activation::Relu => {
            let normal = Normal::new(0.0, (2.0 / n).sqrt()).expect("valid std dev");
            Array2::from_shape_simple_fn((fan_in, fan_out), || normal.sample(rng))
        }
        Activation::Linear | Activation::Sigmoid => {
            let a = (3.0 / n).sqrt();
            let uniform = Uniform::new_inclusive(-a, a).expect("valid bounds");
            Array2::from_shape_simple_fn((fan_in, fan_out), || uniform.sample(rng))
        }
    }
}
