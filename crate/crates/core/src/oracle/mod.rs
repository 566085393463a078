//! Dense, tick-by-tick reference simulator.
//!
//! Every tick decays every potential by one factor of `2^-decay_exp`, adds
//! the weighted input amplitudes of that tick, and applies the threshold
//! subtraction until the potential is back inside the band. Nothing here is
//! shared with the event-driven engine: word walking, decay and reset are all
//! written out again so that agreement between the two is meaningful.

pub mod fuzz;

use crate::codec::{DeltaStream, DeltaWord, SpikeEvent, SpikeTrain};
use crate::network::{run_network_traced, NetSpec, NetworkError, RunOptions};

/// Per-input, per-tick signed amplitudes over `horizon` ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseInput {
    pub horizon: usize,
    pub grid: Vec<Vec<i64>>,
}

pub fn densify(inputs: &[DeltaStream]) -> DenseInput {
    let mut spans = Vec::with_capacity(inputs.len());
    let mut spikes = Vec::with_capacity(inputs.len());
    for stream in inputs {
        let mut tick = 0u64;
        let mut line = Vec::new();
        for word in stream.words() {
            match *word {
                DeltaWord::Overflow => tick += (1u64 << (stream.width().bits() - 1)) - 1,
                DeltaWord::Data { negative, magnitude } => {
                    tick += u64::from(magnitude);
                    line.push((tick, if negative { -1 } else { 1 }));
                }
            }
        }
        spans.push(if stream.is_empty() { None } else { Some(tick) });
        spikes.push(line);
    }
    let horizon = spans.iter().flatten().max().map_or(0, |&t| t as usize + 1);
    let grid = spikes
        .into_iter()
        .map(|line| {
            let mut row = vec![0i64; horizon];
            for (tick, sign) in line {
                row[tick as usize] += sign;
            }
            row
        })
        .collect();
    DenseInput { horizon, grid }
}

/// Output trains of every layer: `[layer][neuron]`.
pub type DenseOutputs = Vec<Vec<SpikeTrain>>;

pub fn dense_simulate(net: &NetSpec, dense: &DenseInput) -> DenseOutputs {
    let horizon = dense.horizon;
    let mut grid = dense.grid.clone();
    let mut outputs = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        assert_eq!(grid.len(), layer.n_inputs, "dense grid does not match layer inputs");
        let divisor = 1i128 << layer.decay_exp;
        let mut potentials = vec![0i128; layer.n_neurons];
        let mut next_grid = vec![vec![0i64; horizon]; layer.n_neurons];
        let mut trains = vec![Vec::new(); layer.n_neurons];
        for tick in 0..horizon {
            for (neuron, potential) in potentials.iter_mut().enumerate() {
                let mut p = potential.div_euclid(divisor);
                for (input, row) in grid.iter().enumerate() {
                    if row[tick] != 0 {
                        p += i128::from(layer.weights[neuron * layer.n_inputs + input]) * i128::from(row[tick]);
                    }
                }
                let mut fired = 0i64;
                while p >= i128::from(layer.theta_high) {
                    p -= i128::from(layer.theta_high);
                    fired += 1;
                }
                if let Some(low) = layer.theta_low {
                    while p <= i128::from(low) {
                        p -= i128::from(low);
                        fired -= 1;
                    }
                }
                *potential = p;
                if fired != 0 {
                    next_grid[neuron][tick] = fired;
                    trains[neuron].push(SpikeEvent::new(tick as u64, fired));
                }
            }
        }
        outputs.push(
            trains
                .into_iter()
                .map(|events| SpikeTrain::new(events).expect("ticks ascend"))
                .collect(),
        );
        grid = next_grid;
    }
    outputs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivalenceReport {
    Equivalent,
    /// First point where the engines disagree; `time` is the earliest tick at
    /// which the two output trains of that neuron differ.
    Divergence {
        layer: usize,
        neuron: usize,
        time: u64,
    },
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivalenceReport::Equivalent)
    }
}

impl std::fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EquivalenceReport::Equivalent => f.write_str("equivalent"),
            EquivalenceReport::Divergence { layer, neuron, time } => {
                write!(f, "divergence at layer {layer}, neuron {neuron}, t={time}")
            }
        }
    }
}

fn first_difference(a: &SpikeTrain, b: &SpikeTrain) -> Option<u64> {
    let (a, b) = (a.events(), b.events());
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if x == y => continue,
            (Some(x), Some(y)) => return Some(x.time.min(y.time)),
            (Some(x), None) | (None, Some(x)) => return Some(x.time),
            (None, None) => unreachable!(),
        }
    }
    None
}

/// Runs `event_net` through the event-driven engine and `oracle_net` through
/// the dense simulator on the same inputs and compares every layer's decoded
/// output trains exactly.
pub fn compare_engines(
    event_net: &NetSpec,
    oracle_net: &NetSpec,
    inputs: &[DeltaStream],
) -> Result<EquivalenceReport, NetworkError> {
    let trace = run_network_traced(event_net, inputs, RunOptions::default())?;
    let dense = dense_simulate(oracle_net, &densify(inputs));
    for (layer, (event_out, dense_out)) in trace.layer_outputs.iter().zip(&dense).enumerate() {
        let earliest = event_out
            .iter()
            .zip(dense_out)
            .enumerate()
            .filter_map(|(neuron, (s, d))| first_difference(&s.decode(), d).map(|t| (t, neuron)))
            .min();
        if let Some((time, neuron)) = earliest {
            return Ok(EquivalenceReport::Divergence { layer, neuron, time });
        }
    }
    Ok(EquivalenceReport::Equivalent)
}

pub fn check_equivalence(net: &NetSpec, inputs: &[DeltaStream]) -> Result<EquivalenceReport, NetworkError> {
    compare_engines(net, net, inputs)
}
