//! Finite-difference checks of analytic gradients.

use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::neural::network::Mlp;
use crate::neural::train::Objective;
use crate::sampling::dataset::sample_rng;
use rand::Rng;

/// Denominator floor for relative errors.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_checked: usize,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.max_abs_error = self.max_abs_error.max(abs);
        self.max_rel_error = self.max_rel_error.max(rel);
        self.n_checked += 1;
    }

    fn merge(mut self, other: GradCheck) -> Self {
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.n_checked += other.n_checked;
        self
    }
}

/// Scalar probe `L = sum(probe * net(x))`, whose output gradient is `probe`.
fn probe_loss(net: &Mlp<f64>, x: ArrayView2<'_, f64>, probe: &Array2<f64>) -> Result<f64> {
    Ok((net.predict_batch(x)? * probe).sum())
}

/// Compares backpropagated weight, bias and input gradients of
/// `sum(probe * net(x))` against central differences with step `h`.
pub fn check_network(net: &Mlp<f64>, x: ArrayView2<'_, f64>, probe: &Array2<f64>, h: f64) -> Result<GradCheck> {
    let cache = net.forward_batch(x)?;
    let (grads, input_grad) = net.backward_batch(&cache, probe.view())?;
    let mut report = GradCheck::default();
    let mut work = net.clone();
    for k in 0..net.layers.len() {
        for idx in 0..net.layers[k].weights.len() {
            let (r, c) = (idx / net.layers[k].fan_out(), idx % net.layers[k].fan_out());
            let numeric = central(h, |d| {
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]] + d;
                let v = probe_loss(&work, x, probe);
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]];
                v
            })?;
            report.record(grads.weights[k][[r, c]], numeric);
        }
        for j in 0..net.layers[k].biases.len() {
            let numeric = central(h, |d| {
                work.layers[k].biases[j] = net.layers[k].biases[j] + d;
                let v = probe_loss(&work, x, probe);
                work.layers[k].biases[j] = net.layers[k].biases[j];
                v
            })?;
            report.record(grads.biases[k][j], numeric);
        }
    }
    let mut xw = x.to_owned();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let numeric = central(h, |d| {
                xw[[i, j]] = x[[i, j]] + d;
                let v = probe_loss(net, xw.view(), probe);
                xw[[i, j]] = x[[i, j]];
                v
            })?;
            report.record(input_grad[[i, j]], numeric);
        }
    }
    Ok(report)
}

/// Compares an objective's parameter gradient on `batch` against central
/// differences of its loss. Frozen layers are skipped.
pub fn check_objective<O: Objective<f64> + ?Sized>(
    net: &Mlp<f64>,
    objective: &O,
    batch: &[usize],
    h: f64,
) -> Result<GradCheck> {
    let (_, grads) = objective.loss_and_gradient(net, batch)?;
    let mut work = net.clone();
    let mut report = GradCheck::default();
    for k in 0..net.layers.len() {
        if net.layers[k].frozen {
            continue;
        }
        let fan_out = net.layers[k].fan_out();
        let mut layer = GradCheck::default();
        for idx in 0..net.layers[k].weights.len() {
            let (r, c) = (idx / fan_out, idx % fan_out);
            let numeric = central(h, |d| {
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]] + d;
                let v = objective.loss(&work, batch);
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]];
                v
            })?;
            layer.record(grads.weights[k][[r, c]], numeric);
        }
        for j in 0..fan_out {
            let numeric = central(h, |d| {
                work.layers[k].biases[j] = net.layers[k].biases[j] + d;
                let v = objective.loss(&work, batch);
                work.layers[k].biases[j] = net.layers[k].biases[j];
                v
            })?;
            layer.record(grads.biases[k][j], numeric);
        }
        report = report.merge(layer);
    }
    Ok(report)
}

/// Spot check of `net` at `n_probes` randomly chosen weight, bias and input
/// coordinates, with a random input batch and output probe drawn from `seed`.
pub fn gradient_check(net: &Mlp<f64>, n_probes: usize, h: f64, seed: u64) -> Result<f64> {
    let mut rng = sample_rng(seed, 11);
    let x = Array2::from_shape_fn((4, net.input_dim()), |_| rng.random_range(0.0..1.0));
    let probe = Array2::from_shape_fn((4, net.output_dim()), |_| rng.random_range(-1.0..1.0));
    let cache = net.forward_batch(x.view())?;
    let (grads, input_grad) = net.backward_batch(&cache, probe.view())?;
    let mut report = GradCheck::default();
    let mut work = net.clone();
    let mut xw = x.clone();
    let n_layers = net.layers.len();
    for _ in 0..n_probes {
        let pick = rng.random_range(0..=n_layers);
        if pick == n_layers {
            let (i, j) = (rng.random_range(0..x.nrows()), rng.random_range(0..x.ncols()));
            let numeric = central(h, |d| {
                xw[[i, j]] = x[[i, j]] + d;
                let v = probe_loss(net, xw.view(), &probe);
                xw[[i, j]] = x[[i, j]];
                v
            })?;
            report.record(input_grad[[i, j]], numeric);
            continue;
        }
        let k = pick;
        let (fan_in, fan_out) = (net.layers[k].fan_in(), net.layers[k].fan_out());
        let c = rng.random_range(0..fan_out);
        if rng.random_range(0..=fan_in) == fan_in {
            let numeric = central(h, |d| {
                work.layers[k].biases[c] = net.layers[k].biases[c] + d;
                let v = probe_loss(&work, x.view(), &probe);
                work.layers[k].biases[c] = net.layers[k].biases[c];
                v
            })?;
            report.record(grads.biases[k][c], numeric);
        } else {
            let r = rng.random_range(0..fan_in);
            let numeric = central(h, |d| {
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]] + d;
                let v = probe_loss(&work, x.view(), &probe);
                work.layers[k].weights[[r, c]] = net.layers[k].weights[[r, c]];
                v
            })?;
            report.record(grads.weights[k][[r, c]], numeric);
        }
    }
    Ok(report.max_rel_error)
}

fn central(h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::Activation;
    use crate::neural::train::Regression;

    fn random(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> Array2<f64> {
        let mut rng = sample_rng(seed, 7);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
    }

    #[test]
    fn identity_network_gradients() {
        let mut net = Mlp::<f64>::init(&[2, 2], Activation::Linear, Activation::Linear, 0).unwrap();
        net.layers[0].weights = Array2::eye(2);
        let x = random(3, 2, 1, -1.0, 1.0);
        let probe = random(3, 2, 2, -1.0, 1.0);
        let r = check_network(&net, x.view(), &probe, 1e-3).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
        assert!(gradient_check(&net, 50, 1e-3, 0).unwrap() < 1e-10);
    }

    #[test]
    fn spot_check_wide_network() {
        let net = Mlp::<f64>::init(&[18, 300, 300, 300, 15], Activation::Relu, Activation::Linear, 5).unwrap();
        assert!(gradient_check(&net, 200, 1e-6, 1).unwrap() < 1e-4);
        let inv = Mlp::<f64>::init(&[27, 300, 300, 300, 6], Activation::Relu, Activation::Sigmoid, 6).unwrap();
        assert!(gradient_check(&inv, 200, 1e-6, 2).unwrap() < 1e-4);
    }

    #[test]
    fn sigmoid_head_gradients() {
        let net = Mlp::<f64>::init(&[4, 6, 5, 3], Activation::Relu, Activation::Sigmoid, 3).unwrap();
        // Keep pre-activations away from the ReLU kink.
        let x = random(4, 4, 4, 0.1, 1.0);
        let probe = random(4, 3, 5, -1.0, 1.0);
        let r = check_network(&net, x.view(), &probe, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.n_checked, net.n_parameters() + 16);
    }

    #[test]
    fn regression_objective_gradients() {
        let mut net = Mlp::<f64>::init(&[3, 5, 2], Activation::Relu, Activation::Linear, 9).unwrap();
        net.layers[0].frozen = true;
        let task = Regression::new(random(6, 3, 10, 0.0, 1.0), random(6, 2, 11, 0.0, 1.0)).unwrap();
        let r = check_objective(&net, &task, &[0, 2, 3, 5], 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.n_checked, 5 * 2 + 2);
    }
}
