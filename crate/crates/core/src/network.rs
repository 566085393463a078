//! Layer composition, input presentation and classification.

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{to_delta_words, CodecError, DeltaStream, SpikeEvent, SpikeTrain, WordWidth};
use crate::layer::{LayerError, LayerState, TimeMode};
use crate::neuron::{NeuronError, NeuronParams};

/// Default number of times a static input is presented.
pub const DEFAULT_REPETITIONS: u32 = 28;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("network has no layers")]
    NoLayers,
    #[error("layer {layer} expects {expected} inputs but the previous stage provides {got}")]
    DimensionMismatch { layer: usize, expected: usize, got: usize },
    #[error("layer {layer}: weight matrix has {got} entries, expected {expected}")]
    WeightShape { layer: usize, expected: usize, got: usize },
    #[error("layer {layer}: weight scale must be positive")]
    InvalidScale { layer: usize },
    #[error("repetition count must be at least 1")]
    ZeroRepetitions,
    #[error("cannot classify an empty count vector")]
    EmptyCounts,
    #[error("layer {layer}: {source}")]
    Neuron { layer: usize, source: NeuronError },
    #[error("layer {layer}: {source}")]
    Layer { layer: usize, source: LayerError },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One fully connected layer with integer weights on a shared fixed-point
/// scale: a threshold of one is `theta_high == weight_scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub decay_exp: u32,
    pub theta_high: i64,
    pub theta_low: Option<i64>,
    pub weight_scale: i64,
    /// Row-major `[neuron][input]`.
    pub weights: Vec<i32>,
}

impl LayerSpec {
    pub fn params(&self) -> Result<NeuronParams, NeuronError> {
        NeuronParams::new(self.decay_exp, self.theta_high, self.theta_low)
    }

    pub fn row(&self, neuron: usize) -> &[i32] {
        &self.weights[neuron * self.n_inputs..(neuron + 1) * self.n_inputs]
    }

    pub fn weight(&self, neuron: usize, input: usize) -> i32 {
        self.weights[neuron * self.n_inputs + input]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub width: WordWidth,
    pub repetitions: u32,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    pub fn new(width: WordWidth, repetitions: u32, layers: Vec<LayerSpec>) -> Result<Self, NetworkError> {
        let net = Self {
            width,
            repetitions,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        if self.repetitions == 0 {
            return Err(NetworkError::ZeroRepetitions);
        }
        for (index, layer) in self.layers.iter().enumerate() {
            let expected = layer.n_inputs * layer.n_neurons;
            if layer.weights.len() != expected {
                return Err(NetworkError::WeightShape {
                    layer: index,
                    expected,
                    got: layer.weights.len(),
                });
            }
            if layer.weight_scale <= 0 {
                return Err(NetworkError::InvalidScale { layer: index });
            }
            layer
                .params()
                .map_err(|source| NetworkError::Neuron { layer: index, source })?;
            if index > 0 && self.layers[index - 1].n_neurons != layer.n_inputs {
                return Err(NetworkError::DimensionMismatch {
                    layer: index,
                    expected: layer.n_inputs,
                    got: self.layers[index - 1].n_neurons,
                });
            }
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_neurons
    }

    pub fn with_width(&self, width: WordWidth) -> NetSpec {
        NetSpec { width, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceResult {
    pub output_counts: Vec<u64>,
    pub label: usize,
    pub total_events: u64,
    pub total_cycles: u64,
}

/// Per-layer statistics and output streams of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTrace {
    pub result: InferenceResult,
    pub layer_outputs: Vec<Vec<DeltaStream>>,
    pub layer_events: Vec<u64>,
    pub layer_cycles: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub time_mode: TimeMode,
    /// Bounded potential register width; `None` means 64-bit.
    pub potential_bits: Option<u32>,
}

/// Static presentation: line `p` spikes with amplitude `amplitudes[p]` at
/// every step `t = 0 .. reps - 1`.
pub fn present_input(amplitudes: &[i64], reps: u32, width: WordWidth) -> Result<Vec<DeltaStream>, NetworkError> {
    if reps == 0 {
        return Err(NetworkError::ZeroRepetitions);
    }
    Ok(amplitudes
        .iter()
        .map(|&q| {
            if q == 0 {
                return DeltaStream::empty(width);
            }
            let events = (0..u64::from(reps)).map(|t| SpikeEvent::new(t, q)).collect();
            let train = SpikeTrain::new(events).expect("unit-spaced nonzero events are valid");
            to_delta_words(&train, width)
        })
        .collect())
}

/// Index of the largest count, lowest index on ties.
pub fn classify(counts: &[u64]) -> Result<usize, NetworkError> {
    let (first, rest) = counts.split_first().ok_or(NetworkError::EmptyCounts)?;
    let mut best = (0, *first);
    for (index, &count) in rest.iter().enumerate() {
        if count > best.1 {
            best = (index + 1, count);
        }
    }
    Ok(best.0)
}

pub fn run_network(net: &NetSpec, inputs: &[DeltaStream]) -> Result<InferenceResult, NetworkError> {
    run_network_traced(net, inputs, RunOptions::default()).map(|trace| trace.result)
}

pub fn run_network_traced(
    net: &NetSpec,
    inputs: &[DeltaStream],
    options: RunOptions,
) -> Result<NetworkTrace, NetworkError> {
    run_network_inspected(net, inputs, options, |_, _| {})
}

/// Runs the layers in order, calling `inspect(layer_index, state)` after
/// every processed event batch.
pub fn run_network_inspected<F>(
    net: &NetSpec,
    inputs: &[DeltaStream],
    options: RunOptions,
    mut inspect: F,
) -> Result<NetworkTrace, NetworkError>
where
    F: FnMut(usize, &LayerState),
{
    net.validate()?;
    if inputs.len() != net.n_inputs() {
        return Err(NetworkError::DimensionMismatch {
            layer: 0,
            expected: net.n_inputs(),
            got: inputs.len(),
        });
    }
    let mut layer_outputs: Vec<Vec<DeltaStream>> = Vec::with_capacity(net.layers.len());
    let mut layer_events = Vec::with_capacity(net.layers.len());
    let mut layer_cycles = Vec::with_capacity(net.layers.len());
    for (index, spec) in net.layers.iter().enumerate() {
        let neuron_err = |source| NetworkError::Neuron { layer: index, source };
        let mut params = spec.params().map_err(neuron_err)?;
        if let Some(bits) = options.potential_bits {
            params = params.with_potential_bits(bits).map_err(neuron_err)?;
        }
        let layer_err = |source| NetworkError::Layer { layer: index, source };
        let mut layer = LayerState::new(spec.n_inputs, spec.n_neurons, &spec.weights, params, net.width)
            .map_err(layer_err)?
            .with_mode(options.time_mode);
        let stage_inputs = layer_outputs.last().map_or(inputs, |v| v.as_slice());
        let outputs = layer
            .run_inspected(stage_inputs, |state| inspect(index, state))
            .map_err(layer_err)?;
        layer_events.push(layer.event_count());
        layer_cycles.push(layer.cycle_estimate());
        layer_outputs.push(outputs);
    }
    let output_counts: Vec<u64> = layer_outputs
        .last()
        .expect("at least one layer")
        .iter()
        .map(|s| s.decode().positive_amplitude())
        .collect();
    let result = InferenceResult {
        label: classify(&output_counts)?,
        output_counts,
        total_events: layer_events.iter().sum(),
        total_cycles: layer_cycles.iter().sum(),
    };
    Ok(NetworkTrace {
        result,
        layer_outputs,
        layer_events,
        layer_cycles,
    })
}

/// Outcome of one labelled sample in a batch evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOutcome {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    pub events: u64,
    pub cycles: u64,
}

impl SampleOutcome {
    pub fn correct(&self) -> bool {
        self.label == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub outcomes: Vec<SampleOutcome>,
}

impl Evaluation {
    pub fn images(&self) -> usize {
        self.outcomes.len()
    }

    pub fn errors(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.correct()).count()
    }

    pub fn accuracy(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        (self.images() - self.errors()) as f64 / self.images() as f64
    }

    pub fn mean_cycles(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().map(|o| o.cycles as f64).sum::<f64>() / self.outcomes.len() as f64
    }
}

/// Classifies every `(amplitudes, label)` sample in parallel. Each sample
/// runs on its own fresh layer states, so results do not depend on the
/// degree of parallelism.
pub fn evaluate(net: &NetSpec, samples: &[(Vec<i64>, usize)]) -> Result<Evaluation, NetworkError> {
    let outcomes = samples
        .par_iter()
        .enumerate()
        .map(|(index, (amplitudes, label))| {
            let inputs = present_input(amplitudes, net.repetitions, net.width)?;
            let result = run_network(net, &inputs)?;
            Ok(SampleOutcome {
                index,
                label: *label,
                predicted: result.label,
                events: result.total_events,
                cycles: result.total_cycles,
            })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    Ok(Evaluation { outcomes })
}
