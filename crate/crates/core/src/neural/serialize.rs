//! Model JSON format.
//!
//! Weights are stored row-major per layer as `fan_in x fan_out`. Floats go
//! through serde_json's shortest round-trip formatting, so a save/load cycle
//! reproduces every bit.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neural::network::{Activation, Dense, Mlp, ModelMeta, ScalingConstants};
use crate::sampling::registry::parameter_names;
use crate::scalar::Scalar;
use crate::stage::{Scheme, Stage};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub stage: Option<Stage>,
    pub scheme: Option<Scheme>,
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub parameter_order: Vec<String>,
    pub scaling_constants: ScalingConstants,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// A loaded network plus any metadata mismatches worth reporting.
#[derive(Debug, Clone)]
pub struct LoadedModel<T> {
    pub net: Mlp<T>,
    pub warnings: Vec<String>,
}

impl ModelDocument {
    pub fn from_net<T: Scalar>(net: &Mlp<T>) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            stage: net.meta.stage,
            scheme: net.meta.scheme,
            dims: net.dims(),
            activations: net.activations(),
            parameter_order: net.meta.parameter_order.clone(),
            scaling_constants: net.meta.scaling_constants,
            weights: net
                .layers
                .iter()
                .map(|l| l.weights.iter().map(|v| v.as_f64()).collect())
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| l.biases.iter().map(|v| v.as_f64()).collect())
                .collect(),
        }
    }

    pub fn into_net<T: Scalar>(self) -> Result<LoadedModel<T>> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let n = self.dims.len().saturating_sub(1);
        if n == 0 {
            return Err(Error::Layer {
                layer: 0,
                message: "dims must list at least input and output sizes".into(),
            });
        }
        for (what, len) in [
            ("activations", self.activations.len()),
            ("weights", self.weights.len()),
            ("biases", self.biases.len()),
        ] {
            if len != n {
                return Err(Error::Layer {
                    layer: len.min(n),
                    message: format!("{what} lists {len} layers, dims imply {n}"),
                });
            }
        }
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
            let layer_err = |message: String| Error::Layer { layer: k, message };
            if fan_in == 0 || fan_out == 0 {
                return Err(layer_err("zero-sized dimension".into()));
            }
            if self.weights[k].len() != fan_in * fan_out {
                return Err(layer_err(format!(
                    "{} weights for a {fan_in}x{fan_out} layer",
                    self.weights[k].len()
                )));
            }
            if self.biases[k].len() != fan_out {
                return Err(layer_err(format!(
                    "{} biases for {fan_out} outputs",
                    self.biases[k].len()
                )));
            }
            if self.weights[k].iter().chain(&self.biases[k]).any(|v| !v.is_finite()) {
                return Err(layer_err("non-finite weight or bias".into()));
            }
            let weights =
                Array2::from_shape_vec((fan_in, fan_out), self.weights[k].iter().map(|&v| T::lit(v)).collect())
                    .map_err(|e| layer_err(e.to_string()))?;
            layers.push(Dense {
                weights,
                biases: Array1::from_iter(self.biases[k].iter().map(|&v| T::lit(v))),
                activation: self.activations[k],
                frozen: false,
            });
        }
        let warnings = registry_warnings(self.stage, &self.parameter_order);
        let meta = ModelMeta {
            stage: self.stage,
            scheme: self.scheme,
            parameter_order: self.parameter_order,
            scaling_constants: self.scaling_constants,
        };
        Ok(LoadedModel {
            net: Mlp { layers, meta },
            warnings,
        })
    }
}

fn registry_warnings(stage: Option<Stage>, order: &[String]) -> Vec<String> {
    let Some(stage) = stage else {
        return Vec::new();
    };
    let current = parameter_names(stage);
    if order == current.as_slice() {
        Vec::new()
    } else {
        vec![format!(
            "model parameter order {order:?} differs from the current {stage} registry {current:?}"
        )]
    }
}

pub fn to_json<T: Scalar>(net: &Mlp<T>) -> Result<String> {
    Ok(serde_json::to_string(&ModelDocument::from_net(net))? + "\n")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<LoadedModel<T>> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    doc.into_net()
}

pub fn save_model<T: Scalar>(net: &Mlp<T>, path: &Path) -> Result<()> {
    fs::write(path, to_json(net)?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<LoadedModel<T>> {
    let text = fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    doc.into_net()
}

/// Hex SHA-256 of the serialized model.
pub fn model_hash<T: Scalar>(net: &Mlp<T>) -> Result<String> {
    Ok(sha256_hex(to_json(net)?.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Mlp<f64> {
        Mlp::<f64>::init(&[3, 5, 2], Activation::Relu, Activation::Sigmoid, 4)
            .unwrap()
            .with_meta(ModelMeta {
                stage: Some(Stage::Cgg),
                scheme: Some(Scheme::Custom),
                parameter_order: parameter_names(Stage::Cgg),
                scaling_constants: ScalingConstants::default(),
            })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut a = net();
        a.layers[0].biases[1] = 1.0 / 3.0;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&a, &p).unwrap();
        let b = load_model::<f64>(&p).unwrap();
        assert!(b.warnings.is_empty());
        assert_eq!(a, b.net);
        let x = [0.1, 0.2, 0.3];
        assert_eq!(a.predict(&x).unwrap(), b.net.predict(&x).unwrap());
        assert_eq!(model_hash(&a).unwrap(), model_hash(&b.net).unwrap());
    }

    #[test]
    fn tampered_dims_name_the_layer() {
        let mut doc = ModelDocument::from_net(&net());
        doc.dims[1] = 6;
        match doc.into_net::<f64>() {
            Err(Error::Layer { layer: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut doc = ModelDocument::from_net(&net());
        doc.biases[1].pop();
        assert!(matches!(doc.into_net::<f64>(), Err(Error::Layer { layer: 1, .. })));
    }

    #[test]
    fn wrong_version_and_corrupt_json() {
        let mut doc = ModelDocument::from_net(&net());
        doc.schema_version = 7;
        assert!(matches!(doc.into_net::<f64>(), Err(Error::Version { found: 7, .. })));
        assert!(from_json::<f64>("{\"schema_version\": 1").is_err());
    }

    #[test]
    fn registry_mismatch_warns() {
        let mut doc = ModelDocument::from_net(&net());
        doc.parameter_order.swap(0, 1);
        let loaded = doc.into_net::<f64>().unwrap();
        assert_eq!(loaded.warnings.len(), 1);
    }
}
