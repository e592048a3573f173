//! Adam with bias-corrected moments.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::network::{Gradients, Mlp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    m_w: Vec<Array2<T>>,
    v_w: Vec<Array2<T>>,
    m_b: Vec<Array1<T>>,
    v_b: Vec<Array1<T>>,
    steps: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, config: AdamConfig) -> Self {
        let zeros = Gradients::zeros_like(net);
        Self {
            config,
            m_w: zeros.weights.clone(),
            v_w: zeros.weights,
            m_b: zeros.biases.clone(),
            v_b: zeros.biases,
            steps: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    /// Applies one update; frozen layers are skipped entirely.
    ///
    /// A non-finite gradient aborts the step before anything is modified.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
        if grads.weights.len() != net.layers.len() || grads.biases.len() != net.layers.len() {
            return Err(Error::invalid("gradient depth does not match network"));
        }
        for (k, (gw, gb)) in grads.weights.iter().zip(&grads.biases).enumerate() {
            if gw.iter().chain(gb.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite gradient in layer {k}")));
            }
        }
        self.steps += 1;
        let b1 = T::lit(self.config.beta1);
        let b2 = T::lit(self.config.beta2);
        let eps = T::lit(self.config.epsilon);
        let c1 = T::one() - b1.powi(self.steps);
        let c2 = T::one() - b2.powi(self.steps);
        let one = T::one();
        let update = |p: &mut T, m: &mut T, v: &mut T, g: &T| {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (k, layer) in net.layers.iter_mut().enumerate() {
            if layer.frozen {
                continue;
            }
            Zip::from(&mut layer.weights)
                .and(&mut self.m_w[k])
                .and(&mut self.v_w[k])
                .and(&grads.weights[k])
                .for_each(update);
            Zip::from(&mut layer.biases)
                .and(&mut self.m_b[k])
                .and(&mut self.v_b[k])
                .and(&grads.biases[k])
                .for_each(update);
        }
        Ok(())
    }
}
