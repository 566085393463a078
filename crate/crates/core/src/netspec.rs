//! `netspec.json` reading and writing.
//!
//! ```json
//! {"width_bits": 8, "repetitions": 28,
//!  "layers": [{"n_inputs": 784, "n_neurons": 1000, "decay_exp": 1,
//!              "theta_high": 32, "theta_low": null, "weight_scale": 32,
//!              "weights": [[...], ...]}]}
//! ```
//!
//! A layer may carry `weights_float` (as exported by the trainer) instead of,
//! or alongside, integer `weights`. Float-only files are quantized on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, WordWidth};
use crate::network::{LayerSpec, NetSpec, NetworkError, DEFAULT_REPETITIONS};
use crate::quant::{quantize_net, FloatLayerSpec, FloatNetSpec, QuantError};

#[derive(Debug, Error)]
pub enum NetSpecError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid netspec JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("layer {layer}: {message}")]
    Schema { layer: usize, message: String },
    #[error("layers carry only float weights; a bit width is required to quantize them")]
    BitsRequired,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

/// Integer thresholds serialize as JSON integers; float thresholds come from
/// training files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Int(i64),
    Float(f64),
}

impl Threshold {
    pub fn as_f64(self) -> f64 {
        match self {
            Threshold::Int(v) => v as f64,
            Threshold::Float(v) => v,
        }
    }

    fn as_int(self) -> Option<i64> {
        match self {
            Threshold::Int(v) => Some(v),
            Threshold::Float(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
            Threshold::Float(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub decay_exp: u32,
    pub theta_high: Threshold,
    #[serde(default)]
    pub theta_low: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_scale: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_float: Option<Vec<Vec<f64>>>,
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpecFile {
    pub width_bits: u32,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    pub layers: Vec<LayerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl NetSpecFile {
    pub fn from_json(text: &str) -> Result<Self, NetSpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetSpecError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| NetSpecError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("netspec serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetSpecError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| NetSpecError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn has_integer_weights(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_some())
    }

    pub fn has_float_weights(&self) -> bool {
        self.layers.iter().all(|l| l.weights_float.is_some())
    }

    /// Integer network. Uses integer weights when every layer has them,
    /// otherwise quantizes the float weights at `bits`.
    pub fn to_netspec(&self, bits: Option<u32>) -> Result<NetSpec, NetSpecError> {
        if self.has_integer_weights() {
            return self.integer_netspec();
        }
        let bits = bits.ok_or(NetSpecError::BitsRequired)?;
        Ok(quantize_net(&self.to_float_netspec()?, bits)?)
    }

    fn integer_netspec(&self) -> Result<NetSpec, NetSpecError> {
        let width = WordWidth::new(self.width_bits)?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(index, layer)| {
                let schema = |message: String| NetSpecError::Schema { layer: index, message };
                let rows = layer.weights.as_ref().expect("checked by caller");
                let weights = flatten(rows, layer.n_inputs, layer.n_neurons).map_err(schema)?;
                let weights = weights
                    .into_iter()
                    .map(|w| i32::try_from(w).map_err(|_| schema(format!("weight {w} exceeds 32 bits"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let theta_high = layer
                    .theta_high
                    .as_int()
                    .ok_or_else(|| schema("theta_high must be an integer".into()))?;
                let theta_low = layer
                    .theta_low
                    .map(|t| t.as_int().ok_or_else(|| schema("theta_low must be an integer".into())))
                    .transpose()?;
                Ok(LayerSpec {
                    n_inputs: layer.n_inputs,
                    n_neurons: layer.n_neurons,
                    decay_exp: layer.decay_exp,
                    theta_high,
                    theta_low,
                    weight_scale: layer.weight_scale.unwrap_or(theta_high),
                    weights,
                })
            })
            .collect::<Result<Vec<_>, NetSpecError>>()?;
        Ok(NetSpec::new(width, self.repetitions, layers)?)
    }

    pub fn to_float_netspec(&self) -> Result<FloatNetSpec, NetSpecError> {
        let width = WordWidth::new(self.width_bits)?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(index, layer)| {
                let rows = layer
                    .weights_float
                    .as_ref()
                    .ok_or(QuantError::MissingFloatWeights(index))?;
                let weights = flatten(rows, layer.n_inputs, layer.n_neurons)
                    .map_err(|message| NetSpecError::Schema { layer: index, message })?;
                Ok(FloatLayerSpec {
                    n_inputs: layer.n_inputs,
                    n_neurons: layer.n_neurons,
                    decay_exp: layer.decay_exp,
                    theta_high: layer.theta_high.as_f64(),
                    theta_low: layer.theta_low.map(Threshold::as_f64),
                    weights,
                })
            })
            .collect::<Result<Vec<_>, NetSpecError>>()?;
        Ok(FloatNetSpec {
            width,
            repetitions: self.repetitions,
            layers,
        })
    }

    pub fn from_netspec(net: &NetSpec) -> Self {
        Self {
            width_bits: net.width.bits(),
            repetitions: net.repetitions,
            layers: net
                .layers
                .iter()
                .map(|layer| LayerFile {
                    n_inputs: layer.n_inputs,
                    n_neurons: layer.n_neurons,
                    decay_exp: layer.decay_exp,
                    theta_high: Threshold::Int(layer.theta_high),
                    theta_low: layer.theta_low.map(Threshold::Int),
                    weight_scale: Some(layer.weight_scale),
                    weights: Some(
                        (0..layer.n_neurons)
                            .map(|n| layer.row(n).iter().map(|&w| i64::from(w)).collect())
                            .collect(),
                    ),
                    weights_float: None,
                })
                .collect(),
            metadata: None,
        }
    }
}

fn flatten<T: Copy>(rows: &[Vec<T>], n_inputs: usize, n_neurons: usize) -> Result<Vec<T>, String> {
    if rows.len() != n_neurons {
        return Err(format!("expected {n_neurons} weight rows, found {}", rows.len()));
    }
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_inputs) {
        return Err(format!("weight row {row} has {} entries, expected {n_inputs}", r.len()));
    }
    Ok(rows.iter().flatten().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const INTEGER: &str = r#"{"width_bits": 8, "repetitions": 3,
        "layers": [
          {"n_inputs": 2, "n_neurons": 2, "decay_exp": 1, "theta_high": 4, "theta_low": null,
           "weight_scale": 4, "weights": [[1, -2], [3, 4]]},
          {"n_inputs": 2, "n_neurons": 1, "decay_exp": 2, "theta_high": 4, "theta_low": -4,
           "weight_scale": 4, "weights": [[2, 2]]}
        ]}"#;

    const FLOAT: &str = r#"{"width_bits": 8,
        "metadata": {"lr": 0.0005, "optimizer": "adam"},
        "layers": [
          {"n_inputs": 3, "n_neurons": 1, "decay_exp": 1, "theta_high": 1.0, "theta_low": null,
           "weights_float": [[-1.0, 0.5, 1.0]]}
        ]}"#;

    #[test]
    fn integer_file_loads() {
        let file = NetSpecFile::from_json(INTEGER).unwrap();
        let net = file.to_netspec(None).unwrap();
        assert_eq!(net.repetitions, 3);
        assert_eq!(net.layers[0].weights, vec![1, -2, 3, 4]);
        assert_eq!(net.layers[1].theta_low, Some(-4));
        assert_eq!(net.layers[1].decay_exp, 2);
    }

    #[test]
    fn roundtrip_through_json() {
        let net = NetSpecFile::from_json(INTEGER).unwrap().to_netspec(None).unwrap();
        let text = NetSpecFile::from_netspec(&net).to_json();
        assert!(text.contains(r#""theta_high":4"#));
        assert_eq!(NetSpecFile::from_json(&text).unwrap().to_netspec(None).unwrap(), net);
    }

    #[test]
    fn float_file_quantizes_on_load() {
        let file = NetSpecFile::from_json(FLOAT).unwrap();
        assert_eq!(file.repetitions, DEFAULT_REPETITIONS);
        assert!(matches!(file.to_netspec(None), Err(NetSpecError::BitsRequired)));
        let net = file.to_netspec(Some(4)).unwrap();
        assert_eq!(net.layers[0].weights, vec![-4, 2, 4]);
        assert_eq!(net.layers[0].weight_scale, 4);
        assert_eq!(net.layers[0].theta_high, 4);
    }

    #[test]
    fn missing_float_weights() {
        let file = NetSpecFile::from_json(INTEGER).unwrap();
        assert!(matches!(
            file.to_float_netspec(),
            Err(NetSpecError::Quant(QuantError::MissingFloatWeights(0)))
        ));
    }

    #[test]
    fn schema_errors() {
        let bad_rows = INTEGER.replace("[[2, 2]]", "[[2, 2, 2]]");
        assert!(matches!(
            NetSpecFile::from_json(&bad_rows).unwrap().to_netspec(None),
            Err(NetSpecError::Schema { layer: 1, .. })
        ));
        let bad_dims = INTEGER.replace(r#""n_inputs": 2, "n_neurons": 1"#, r#""n_inputs": 3, "n_neurons": 1"#);
        assert!(NetSpecFile::from_json(&bad_dims).unwrap().to_netspec(None).is_err());
        let fractional = INTEGER.replace(
            r#""theta_high": 4, "theta_low": null"#,
            r#""theta_high": 4.5, "theta_low": null"#,
        );
        assert!(matches!(
            NetSpecFile::from_json(&fractional).unwrap().to_netspec(None),
            Err(NetSpecError::Schema { layer: 0, .. })
        ));
        assert!(NetSpecFile::from_json("{").is_err());
    }
}
