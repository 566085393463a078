//! Event-driven processing of one fully connected layer.
//!
//! Every input synapse owns a FIFO of delta words and an integrator that turns
//! the words back into absolute time. The layer repeatedly scans the input
//! heads for the smallest pending time, gathers every spike sharing that time
//! into an [`EventBatch`], and broadcasts the batch to all neuron cores. Each
//! core accumulates its own weights for the batch, decays by the time since
//! the previous batch and fires; firing cores append differential-time words
//! to their output streams.
//!
//! Processing cost is tracked separately from spike time: a batch costs one
//! cycle per input (the rotation that finds the minimum) and every emitted
//! output word costs one more.

use std::collections::VecDeque;

use thiserror::Error;

use crate::codec::{DeltaStream, DeltaWord, WordWidth};
use crate::neuron::{NeuronError, NeuronParams, NeuronState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayerError {
    #[error("input index {index} out of range for {n_inputs} inputs")]
    InputOutOfRange { index: usize, n_inputs: usize },
    #[error("expected {expected} input streams, got {got}")]
    InputCountMismatch { expected: usize, got: usize },
    #[error("input stream width {got} does not match layer width {expected}")]
    WidthMismatch { expected: u32, got: u32 },
    #[error("word on input {index} does not fit the {width}-bit layer width")]
    InvalidWord { index: usize, width: u32 },
    #[error("weight matrix has {got} entries, expected {n_neurons} x {n_inputs}")]
    WeightShape {
        n_neurons: usize,
        n_inputs: usize,
        got: usize,
    },
    #[error("event batch does not match the pending input spikes")]
    InvalidBatch,
    #[error("rebase span {span} exceeds the smallest time register {limit}")]
    RebaseTooLarge { span: u64, limit: i64 },
    #[error(transparent)]
    Neuron(#[from] NeuronError),
}

/// How the layer keeps its time registers bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeMode {
    /// Registers grow with the processed time span.
    #[default]
    Unbounded,
    /// Overflow words are emitted as soon as a neuron's output timer wraps,
    /// and every register is then reduced by the oldest output time, so the
    /// window `t_curr - min(last_out_time)` stays below one overflow span.
    Rebased,
}

/// Spikes from all inputs that share the smallest pending time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventBatch {
    pub time: i64,
    /// `(input, sign)`, one entry per word, so a zero-delta word on the same
    /// input appears as a separate entry.
    pub contributions: Vec<(usize, i64)>,
}

#[derive(Debug, Clone, Default)]
struct InputChannel {
    queue: VecDeque<DeltaWord>,
    /// Absolute time of the last consumed word, overflow words included.
    integrator: i64,
}

impl InputChannel {
    /// Time and sign of the head spike. Overflow words never sit at the head
    /// once [`LayerState::integrate_head`] has run.
    fn pending(&self) -> Option<(i64, i64)> {
        match self.queue.front() {
            Some(&DeltaWord::Data { negative, magnitude }) => {
                Some((self.integrator + i64::from(magnitude), if negative { -1 } else { 1 }))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerState {
    params: NeuronParams,
    width: WordWidth,
    mode: TimeMode,
    inputs: Vec<InputChannel>,
    t_curr: i64,
    neurons: Vec<NeuronState>,
    outputs: Vec<DeltaStream>,
    cycle_counter: u64,
    events: u64,
    rebased: u64,
    scratch: Vec<(usize, i64)>,
}

impl LayerState {
    /// `weights` is row-major `[neuron][input]`.
    pub fn new(
        n_inputs: usize,
        n_neurons: usize,
        weights: &[i32],
        params: NeuronParams,
        width: WordWidth,
    ) -> Result<Self, LayerError> {
        if weights.len() != n_inputs * n_neurons {
            return Err(LayerError::WeightShape {
                n_neurons,
                n_inputs,
                got: weights.len(),
            });
        }
        let neurons = if n_inputs == 0 {
            vec![NeuronState::new(Vec::new()); n_neurons]
        } else {
            weights
                .chunks(n_inputs)
                .map(|row| NeuronState::new(row.to_vec()))
                .collect()
        };
        Ok(Self {
            params,
            width,
            mode: TimeMode::Unbounded,
            inputs: vec![InputChannel::default(); n_inputs],
            t_curr: 0,
            neurons,
            outputs: vec![DeltaStream::empty(width); n_neurons],
            cycle_counter: 0,
            events: 0,
            rebased: 0,
            scratch: Vec::new(),
        })
    }

    pub fn with_mode(mut self, mode: TimeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn params(&self) -> &NeuronParams {
        &self.params
    }

    pub fn width(&self) -> WordWidth {
        self.width
    }

    pub fn t_curr(&self) -> i64 {
        self.t_curr
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn neurons_mut(&mut self) -> &mut [NeuronState] {
        &mut self.neurons
    }

    /// Number of event batches processed so far.
    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Total ticks removed from the registers by rebasing.
    pub fn rebased_ticks(&self) -> u64 {
        self.rebased
    }

    /// The integrator of input `index`: the pending spike time if one is
    /// queued, otherwise the time consumed so far.
    pub fn integrated_time(&self, index: usize) -> i64 {
        let input = &self.inputs[index];
        input.pending().map_or(input.integrator, |(t, _)| t)
    }

    pub fn pending_spike(&self, index: usize) -> Option<(i64, i64)> {
        self.inputs[index].pending()
    }

    pub fn output_streams(&self) -> &[DeltaStream] {
        &self.outputs
    }

    pub fn ingest(&mut self, index: usize, word: DeltaWord) -> Result<(), LayerError> {
        let n_inputs = self.inputs.len();
        let input = self
            .inputs
            .get_mut(index)
            .ok_or(LayerError::InputOutOfRange { index, n_inputs })?;
        word.to_raw(self.width).map_err(|_| LayerError::InvalidWord {
            index,
            width: self.width.bits(),
        })?;
        input.queue.push_back(word);
        if input.queue.len() == 1 {
            self.integrate_head(index);
        }
        Ok(())
    }

    fn integrate_head(&mut self, index: usize) {
        let span = self.width.overflow_span() as i64;
        let input = &mut self.inputs[index];
        while input.queue.front() == Some(&DeltaWord::Overflow) {
            input.queue.pop_front();
            input.integrator += span;
        }
    }

    /// Minimum scan over the input heads. Returns every spike at the minimum
    /// time, including zero-delta words queued behind a head, and charges one
    /// cycle per input.
    pub fn next_event(&mut self) -> Option<EventBatch> {
        let time = self
            .inputs
            .iter()
            .filter_map(|input| input.pending().map(|(t, _)| t))
            .min()?;
        let mut contributions = Vec::new();
        for (index, input) in self.inputs.iter().enumerate() {
            if input.pending().map(|(t, _)| t) != Some(time) {
                continue;
            }
            let mut words = input.queue.iter();
            if let Some(head) = words.next() {
                contributions.push((index, head.sign()));
            }
            for word in words {
                match word {
                    DeltaWord::Data { magnitude: 0, .. } => contributions.push((index, word.sign())),
                    _ => break,
                }
            }
        }
        self.cycle_counter += self.inputs.len() as u64;
        Some(EventBatch { time, contributions })
    }

    /// Hands one batch to every neuron core and returns the words each firing
    /// (or, in rebased mode, wrapping) neuron emitted.
    pub fn process_event(&mut self, batch: &EventBatch) -> Result<Vec<(usize, Vec<DeltaWord>)>, LayerError> {
        if batch.time < self.t_curr {
            return Err(LayerError::InvalidBatch);
        }
        self.net_contributions(batch)?;
        let dt = (batch.time - self.t_curr) as u64;

        for &(index, count) in &self.scratch {
            if count == 0 {
                continue;
            }
            for neuron in &mut self.neurons {
                neuron.accumulate_count(index, count, &self.params)?;
            }
        }
        self.t_curr = batch.time;

        let span = self.width.overflow_span();
        let mut emitted = Vec::new();
        let mut wrapped = false;
        for (index, neuron) in self.neurons.iter_mut().enumerate() {
            let fired = neuron.step(&self.params, dt)?;
            let stream = &mut self.outputs[index];
            let before = stream.len();
            if fired != 0 {
                let delta = (self.t_curr - neuron.last_out_time) as u64;
                stream.push_event(delta, fired);
                neuron.last_out_time = self.t_curr;
                wrapped |= self.mode == TimeMode::Rebased && delta >= span;
            } else if self.mode == TimeMode::Rebased {
                let behind = (self.t_curr - neuron.last_out_time) as u64;
                if behind >= span {
                    neuron.last_out_time += stream.push_idle(behind) as i64;
                    wrapped = true;
                }
            }
            if stream.len() > before {
                self.cycle_counter += (stream.len() - before) as u64;
                emitted.push((index, stream.words()[before..].to_vec()));
            }
        }

        for entry in 0..self.scratch.len() {
            let (index, _) = self.scratch[entry];
            let consumed = batch.contributions.iter().filter(|&&(i, _)| i == index).count();
            for _ in 0..consumed {
                self.inputs[index].queue.pop_front();
                self.inputs[index].integrator = batch.time;
                self.integrate_head(index);
            }
        }
        self.events += 1;

        if wrapped {
            let span = self.rebase_limit().max(0) as u64;
            self.rebase(span)?;
        }
        Ok(emitted)
    }

    /// Collapses the batch into `(input, net signed count)` in `scratch`,
    /// checking that each input really has that many spikes at `batch.time`.
    fn net_contributions(&mut self, batch: &EventBatch) -> Result<(), LayerError> {
        self.scratch.clear();
        let mut sorted = batch.contributions.clone();
        sorted.sort_unstable_by_key(|&(i, _)| i);
        for (index, sign) in sorted {
            if sign != 1 && sign != -1 {
                return Err(LayerError::InvalidBatch);
            }
            match self.scratch.last_mut() {
                Some((last, count)) if *last == index => *count += sign,
                _ => self.scratch.push((index, sign)),
            }
        }
        for &(index, _) in &self.scratch {
            let input = self.inputs.get(index).ok_or(LayerError::InvalidBatch)?;
            let available = match input.pending() {
                Some((t, _)) if t == batch.time => {
                    1 + input
                        .queue
                        .iter()
                        .skip(1)
                        .take_while(|w| matches!(w, DeltaWord::Data { magnitude: 0, .. }))
                        .count()
                }
                _ => 0,
            };
            let wanted = batch.contributions.iter().filter(|&&(i, _)| i == index).count();
            if wanted > available {
                return Err(LayerError::InvalidBatch);
            }
        }
        Ok(())
    }

    /// Largest span [`rebase`](Self::rebase) accepts: the smallest of
    /// `t_curr`, every output time and every pending input time.
    pub fn rebase_limit(&self) -> i64 {
        let neurons = self.neurons.iter().map(|n| n.last_out_time);
        let inputs = self.inputs.iter().filter_map(|i| i.pending().map(|(t, _)| t));
        neurons.chain(inputs).fold(self.t_curr, i64::min)
    }

    /// Subtracts `span` from every time register. Emitted and queued words
    /// are untouched since they only hold differences.
    pub fn rebase(&mut self, span: u64) -> Result<(), LayerError> {
        let limit = self.rebase_limit();
        if span as i128 > limit as i128 {
            return Err(LayerError::RebaseTooLarge { span, limit });
        }
        let span = span as i64;
        self.t_curr -= span;
        for input in &mut self.inputs {
            input.integrator -= span;
        }
        for neuron in &mut self.neurons {
            neuron.last_out_time -= span;
        }
        self.rebased += span as u64;
        Ok(())
    }

    /// Feeds `inputs`, processes every event, pads each output with overflow
    /// words up to the end of the longest input and returns the outputs.
    pub fn run(&mut self, inputs: &[DeltaStream]) -> Result<Vec<DeltaStream>, LayerError> {
        self.run_inspected(inputs, |_| {})
    }

    /// Like [`run`](Self::run), calling `inspect` after every processed batch.
    pub fn run_inspected<F>(&mut self, inputs: &[DeltaStream], mut inspect: F) -> Result<Vec<DeltaStream>, LayerError>
    where
        F: FnMut(&LayerState),
    {
        if inputs.len() != self.inputs.len() {
            return Err(LayerError::InputCountMismatch {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        if let Some(bad) = inputs.iter().find(|s| s.width() != self.width) {
            return Err(LayerError::WidthMismatch {
                expected: self.width.bits(),
                got: bad.width().bits(),
            });
        }
        for (index, stream) in inputs.iter().enumerate() {
            for &word in stream.words() {
                self.ingest(index, word)?;
            }
        }
        while let Some(batch) = self.next_event() {
            self.process_event(&batch)?;
            inspect(self);
        }
        self.flush();
        let empty = vec![DeltaStream::empty(self.width); self.neurons.len()];
        Ok(std::mem::replace(&mut self.outputs, empty))
    }

    fn flush(&mut self) {
        let end = self.inputs.iter().map(|i| i.integrator).fold(self.t_curr, i64::max);
        for (neuron, stream) in self.neurons.iter_mut().zip(&mut self.outputs) {
            let behind = (end - neuron.last_out_time).max(0) as u64;
            let before = stream.len();
            neuron.last_out_time += stream.push_idle(behind) as i64;
            self.cycle_counter += (stream.len() - before) as u64;
        }
    }

    /// Rotation cycles plus one cycle per emitted output word.
    pub fn cycle_estimate(&self) -> u64 {
        self.cycle_counter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{to_delta_words, SpikeTrain};

    fn b(bits: u32) -> WordWidth {
        WordWidth::new(bits).unwrap()
    }

    fn layer(n_in: usize, n_out: usize, weights: &[i32], high: i64, bits: u32) -> LayerState {
        let params = NeuronParams::new(1, high, None).unwrap();
        LayerState::new(n_in, n_out, weights, params, b(bits)).unwrap()
    }

    fn stream(pairs: &[(u64, i64)], bits: u32) -> DeltaStream {
        to_delta_words(&SpikeTrain::from_pairs(pairs).unwrap(), b(bits))
    }

    #[test]
    fn ingest_integrates_head() {
        let mut l = layer(2, 1, &[1, 1], 10, 4);
        l.ingest(0, DeltaWord::positive(3)).unwrap();
        assert_eq!(l.pending_spike(0), Some((3, 1)));
        l.ingest(0, DeltaWord::negative(0)).unwrap();
        assert_eq!(l.pending_spike(0), Some((3, 1)));
        l.ingest(1, DeltaWord::Overflow).unwrap();
        assert_eq!(l.integrated_time(1), 7);
        assert_eq!(l.pending_spike(1), None);
        assert_eq!(
            l.ingest(2, DeltaWord::positive(1)),
            Err(LayerError::InputOutOfRange { index: 2, n_inputs: 2 })
        );

        let batch = l.next_event().unwrap();
        assert_eq!(batch.contributions, vec![(0, 1), (0, -1)]);
        l.process_event(&batch).unwrap();
        assert_eq!(l.pending_spike(0), None);
        assert_eq!(l.integrated_time(0), 3);
    }

    #[test]
    fn zero_delta_follows_consumed_head() {
        let mut l = layer(1, 1, &[1], 10, 8);
        l.ingest(0, DeltaWord::positive(3)).unwrap();
        l.ingest(0, DeltaWord::positive(2)).unwrap();
        l.ingest(0, DeltaWord::negative(0)).unwrap();
        let first = l.next_event().unwrap();
        assert_eq!(
            first,
            EventBatch {
                time: 3,
                contributions: vec![(0, 1)]
            }
        );
        l.process_event(&first).unwrap();
        assert_eq!(l.pending_spike(0), Some((5, 1)));
        let second = l.next_event().unwrap();
        assert_eq!(second.contributions, vec![(0, 1), (0, -1)]);
    }

    #[test]
    fn min_scan_with_tie() {
        let mut l = layer(3, 1, &[1, 1, 1], 10, 8);
        l.ingest(0, DeltaWord::positive(5)).unwrap();
        l.ingest(1, DeltaWord::positive(3)).unwrap();
        l.ingest(2, DeltaWord::positive(3)).unwrap();
        let batch = l.next_event().unwrap();
        assert_eq!(
            batch,
            EventBatch {
                time: 3,
                contributions: vec![(1, 1), (2, 1)]
            }
        );
        assert_eq!(l.cycle_estimate(), 3);
    }

    #[test]
    fn no_pending_spikes() {
        let mut l = layer(3, 1, &[1, 1, 1], 10, 4);
        assert_eq!(l.next_event(), None);
        l.ingest(1, DeltaWord::Overflow).unwrap();
        assert_eq!(l.next_event(), None);
        assert_eq!(l.cycle_estimate(), 0);

        let mut l = layer(3, 1, &[1, 1, 1], 10, 8);
        l.ingest(0, DeltaWord::positive(5)).unwrap();
        assert_eq!(
            l.next_event().unwrap(),
            EventBatch {
                time: 5,
                contributions: vec![(0, 1)]
            }
        );
    }

    #[test]
    fn single_spike_crossing_threshold() {
        let mut l = layer(1, 1, &[10], 10, 8);
        let out = l.run(&[stream(&[(4, 1)], 8)]).unwrap();
        assert_eq!(out[0].words(), &[DeltaWord::positive(4)]);

        let mut l = layer(1, 1, &[5], 10, 8);
        let out = l.run(&[stream(&[(4, 1)], 8)]).unwrap();
        assert!(out[0].is_empty());
        assert_eq!(l.neurons()[0].potential, 5);
    }

    #[test]
    fn tie_batch_accumulates_both_signs() {
        let mut l = layer(2, 1, &[7, -3], 10, 8);
        l.ingest(0, DeltaWord::positive(2)).unwrap();
        l.ingest(1, DeltaWord::negative(2)).unwrap();
        let batch = l.next_event().unwrap();
        let emitted = l.process_event(&batch).unwrap();
        assert_eq!(emitted, vec![(0, vec![DeltaWord::positive(2)])]);
        assert_eq!(l.neurons()[0].potential, 0);
    }

    #[test]
    fn batch_order_does_not_matter() {
        let build = || {
            let mut l = layer(3, 2, &[4, -6, 9, 3, 3, -2], 5, 8);
            for (i, w) in [
                (0, DeltaWord::positive(2)),
                (1, DeltaWord::negative(2)),
                (2, DeltaWord::positive(2)),
                (2, DeltaWord::positive(0)),
            ] {
                l.ingest(i, w).unwrap();
            }
            l
        };
        let mut a = build();
        let mut c = build();
        let batch = a.next_event().unwrap();
        let mut reversed = batch.clone();
        reversed.contributions.reverse();
        c.next_event();
        assert_eq!(a.process_event(&batch).unwrap(), c.process_event(&reversed).unwrap());
        assert_eq!(a.neurons(), c.neurons());
    }

    #[test]
    fn foreign_batch_is_rejected() {
        let mut l = layer(2, 1, &[1, 1], 10, 8);
        l.ingest(0, DeltaWord::positive(2)).unwrap();
        let bogus = EventBatch {
            time: 2,
            contributions: vec![(1, 1)],
        };
        assert_eq!(l.process_event(&bogus), Err(LayerError::InvalidBatch));
        let doubled = EventBatch {
            time: 2,
            contributions: vec![(0, 1), (0, 1)],
        };
        assert_eq!(l.process_event(&doubled), Err(LayerError::InvalidBatch));
    }

    #[test]
    fn empty_inputs_give_empty_outputs() {
        let mut l = layer(2, 3, &[1; 6], 10, 8);
        let out = l.run(&[DeltaStream::empty(b(8)), DeltaStream::empty(b(8))]).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|s| s.is_empty()));
        assert_eq!(l.cycle_estimate(), 0);
    }

    #[test]
    fn run_checks_inputs() {
        let mut l = layer(2, 1, &[1, 1], 10, 8);
        assert_eq!(
            l.run(&[DeltaStream::empty(b(8))]),
            Err(LayerError::InputCountMismatch { expected: 2, got: 1 })
        );
        assert_eq!(
            l.run(&[DeltaStream::empty(b(8)), DeltaStream::empty(b(4))]),
            Err(LayerError::WidthMismatch { expected: 8, got: 4 })
        );
    }

    #[test]
    fn diagonal_layer_reproduces_inputs() {
        let theta = 6;
        let n = 4;
        let mut weights = vec![0; n * n];
        for i in 0..n {
            weights[i * n + i] = theta as i32;
        }
        let trains = [
            vec![(0, 1), (3, 2), (40, 1)],
            vec![],
            vec![(9, 1), (9, 1), (10, 3)],
            vec![(100, 1)],
        ];
        let inputs: Vec<_> = trains.iter().map(|t| stream(t, 4)).collect();
        let mut l = layer(n, n, &weights, theta, 4);
        let out = l.run(&inputs).unwrap();
        for (o, i) in out.iter().zip(&inputs) {
            assert_eq!(o.decode(), i.decode());
        }
    }

    #[test]
    fn outputs_cover_input_span() {
        let mut l = layer(1, 2, &[10, 0], 10, 4);
        // spike at 3, then 20 idle ticks on the input
        let input = DeltaStream::new(
            b(4),
            vec![
                DeltaWord::positive(3),
                DeltaWord::Overflow,
                DeltaWord::Overflow,
                DeltaWord::positive(6),
            ],
        )
        .unwrap();
        let out = l.run(&[input]).unwrap();
        // neuron 0 fires at 3 and again at 23; 23 - 3 = 20 = 2 * 7 + 6
        assert_eq!(
            out[0].words(),
            &[
                DeltaWord::positive(3),
                DeltaWord::Overflow,
                DeltaWord::Overflow,
                DeltaWord::positive(6)
            ]
        );
        // neuron 1 never fires but is padded to 21 of the 23 ticks
        assert_eq!(out[1].words(), &[DeltaWord::Overflow; 3]);
    }

    #[test]
    fn rebase_shifts_every_register() {
        let mut l = layer(2, 2, &[1, 1, 1, 1], 10, 8);
        l.t_curr = 100;
        l.inputs[0].integrator = 100;
        l.inputs[0].queue.push_back(DeltaWord::positive(3));
        l.inputs[1].integrator = 100;
        l.inputs[1].queue.push_back(DeltaWord::positive(10));
        l.neurons[0].last_out_time = 95;
        l.neurons[1].last_out_time = 98;
        let before = l.clone();

        l.rebase(0).unwrap();
        assert_eq!(l.t_curr(), 100);
        assert_eq!(l.integrated_time(0), 103);

        l.rebase(90).unwrap();
        assert_eq!(l.t_curr(), 10);
        assert_eq!((l.integrated_time(0), l.integrated_time(1)), (13, 20));
        assert_eq!((l.neurons()[0].last_out_time, l.neurons()[1].last_out_time), (5, 8));
        assert_eq!(l.inputs[0].queue, before.inputs[0].queue);

        assert_eq!(l.rebase(6), Err(LayerError::RebaseTooLarge { span: 6, limit: 5 }));
    }

    #[test]
    fn cycle_model() {
        // 3 inputs, 5 distinct spike times, one neuron firing twice
        let mut l = layer(3, 1, &[2, 2, 2], 3, 8);
        let inputs = [
            stream(&[(1, 1), (4, 1)], 8),
            stream(&[(2, 1)], 8),
            stream(&[(3, 1), (5, 1)], 8),
        ];
        let out = l.run(&inputs).unwrap();
        assert_eq!(l.event_count(), 5);
        assert_eq!(out[0].len(), 2);
        assert_eq!(l.cycle_estimate(), 5 * 3 + 2);
    }
}
