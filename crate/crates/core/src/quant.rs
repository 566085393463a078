//! Power-of-two fixed-point quantization of trained weights and the
//! bit-width accuracy sweep.
//!
//! Each layer gets one scale `s`, the largest power of two with
//! `max|w| * s <= 2^(bits-1) - 1`. Weights become `round(w * s)` (half away
//! from zero), saturated to the symmetric range, and thresholds are scaled by
//! the same `s` so that all neuron arithmetic stays in integers.

use std::io::Write;

use thiserror::Error;

use crate::codec::WordWidth;
use crate::network::{evaluate, LayerSpec, NetSpec, NetworkError};

/// Upper bound on the scale for layers whose weights are all tiny.
pub const MAX_SCALE: i64 = 1 << 30;

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("bit width {0} outside 2..=16")]
    InvalidBits(u32),
    #[error("weight {value} at index {index} is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("missing float weights in layer {0}")]
    MissingFloatWeights(usize),
    #[error("layer {layer}: threshold {value} vanishes at scale {scale}")]
    ThresholdVanishes { layer: usize, value: f64, scale: i64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantScheme {
    bits: u32,
    scale: i64,
}

impl QuantScheme {
    pub fn for_weights(weights: &[f64], bits: u32) -> Result<Self, QuantError> {
        if !(2..=16).contains(&bits) {
            return Err(QuantError::InvalidBits(bits));
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(QuantError::NonFinite { index, value });
        }
        let max_abs = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let max_level = max_level(bits) as f64;
        let mut scale = 1i64;
        if max_abs > 0.0 {
            while scale < MAX_SCALE && max_abs * (2 * scale) as f64 <= max_level {
                scale *= 2;
            }
        }
        Ok(Self { bits, scale })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn max_level(&self) -> i32 {
        max_level(self.bits)
    }

    pub fn quantize(&self, weight: f64) -> i32 {
        let level = self.max_level() as f64;
        (weight * self.scale as f64).round().clamp(-level, level) as i32
    }

    pub fn dequantize(&self, level: i32) -> f64 {
        f64::from(level) / self.scale as f64
    }
}

fn max_level(bits: u32) -> i32 {
    (1i32 << (bits - 1)) - 1
}

pub fn quantize_weights(weights: &[f64], bits: u32) -> Result<(Vec<i32>, i64), QuantError> {
    let scheme = QuantScheme::for_weights(weights, bits)?;
    Ok((weights.iter().map(|&w| scheme.quantize(w)).collect(), scheme.scale()))
}

/// Layer with real-valued weights and thresholds, as produced by training.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatLayerSpec {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub decay_exp: u32,
    pub theta_high: f64,
    pub theta_low: Option<f64>,
    /// Row-major `[neuron][input]`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatNetSpec {
    pub width: WordWidth,
    pub repetitions: u32,
    pub layers: Vec<FloatLayerSpec>,
}

pub fn quantize_layer(layer: &FloatLayerSpec, index: usize, bits: u32) -> Result<LayerSpec, QuantError> {
    let scheme = QuantScheme::for_weights(&layer.weights, bits)?;
    let scale = scheme.scale();
    let scaled = |value: f64| (value * scale as f64).round() as i64;
    let theta_high = scaled(layer.theta_high);
    if theta_high <= 0 {
        return Err(QuantError::ThresholdVanishes {
            layer: index,
            value: layer.theta_high,
            scale,
        });
    }
    let theta_low = match layer.theta_low {
        Some(low) if scaled(low) >= 0 => {
            return Err(QuantError::ThresholdVanishes {
                layer: index,
                value: low,
                scale,
            })
        }
        other => other.map(scaled),
    };
    Ok(LayerSpec {
        n_inputs: layer.n_inputs,
        n_neurons: layer.n_neurons,
        decay_exp: layer.decay_exp,
        theta_high,
        theta_low,
        weight_scale: scale,
        weights: layer.weights.iter().map(|&w| scheme.quantize(w)).collect(),
    })
}

pub fn quantize_net(net: &FloatNetSpec, bits: u32) -> Result<NetSpec, QuantError> {
    let layers = net
        .layers
        .iter()
        .enumerate()
        .map(|(index, layer)| quantize_layer(layer, index, bits))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NetSpec::new(net.width, net.repetitions, layers)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub bits: u32,
    pub accuracy: f64,
    pub images: usize,
    pub errors: usize,
}

/// Quantizes `net` at each bit width and classifies every sample.
pub fn sweep(
    net: &FloatNetSpec,
    samples: &[(Vec<i64>, usize)],
    bits_list: &[u32],
) -> Result<Vec<SweepRow>, QuantError> {
    bits_list
        .iter()
        .map(|&bits| {
            let quantized = quantize_net(net, bits)?;
            let eval = evaluate(&quantized, samples)?;
            Ok(SweepRow {
                bits,
                accuracy: eval.accuracy(),
                images: eval.images(),
                errors: eval.errors(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<(), QuantError> {
    let io = |e: std::io::Error| QuantError::Io(e.to_string());
    writeln!(out, "bits,accuracy,images,errors").map_err(io)?;
    for row in rows {
        writeln!(out, "{},{:.4},{},{}", row.bits, row.accuracy, row.images, row.errors).map_err(io)?;
    }
    Ok(())
}
