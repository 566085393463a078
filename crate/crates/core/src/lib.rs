//! Event-driven, integer-exact simulation of spiking neural network layers
//! that exchange differential-time-encoded spike streams.
//!
//! The pipeline, bottom up:
//!
//! - [`codec`]: spike trains, sign-magnitude delta words with overflow
//!   words, and the `DTS1` stream file format.
//! - [`neuron`]: shift-decay leaky integrate-and-fire core with reset-to-mod.
//! - [`layer`]: one fully connected layer driven by a min-scan over per-input
//!   time integrators.
//! - [`network`]: layer chaining, static input presentation, classification.
//! - [`quant`]: power-of-two weight quantization and the bit-width sweep.
//! - [`oracle`]: dense tick-by-tick reference simulator for exact checks.
//! - [`dataset`] and [`netspec`]: IDX images and `netspec.json` files.

pub mod codec;
pub mod dataset;
pub mod layer;
pub mod netspec;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod quant;

pub use codec::{DeltaStream, DeltaWord, SpikeEvent, SpikeTrain, WordWidth};
pub use layer::{EventBatch, LayerState, TimeMode};
pub use network::{classify, present_input, run_network, InferenceResult, LayerSpec, NetSpec};
pub use neuron::{NeuronParams, NeuronState};
