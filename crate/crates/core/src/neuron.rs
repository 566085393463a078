//! Integer leaky integrate-and-fire core with shift decay and reset-to-mod.
//!
//! The decay factor is restricted to `2^-decay_exp`, so decaying a potential
//! over `dt` ticks is an arithmetic right shift by `decay_exp * dt`. Weights,
//! thresholds and potentials share one fixed-point scale; with integer spike
//! amplitudes the shift is the only rounding step in the whole update.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeuronError {
    #[error("decay exponent must be at least 1")]
    InvalidDecay,
    #[error("positive threshold must be greater than zero, got {0}")]
    InvalidThetaHigh(i64),
    #[error("negative threshold must be below zero, got {0}")]
    InvalidThetaLow(i64),
    #[error("potential width must be between 2 and 64 bits, got {0}")]
    InvalidPotentialWidth(u32),
    #[error("synapse index {index} out of range for {len} weights")]
    SynapseOutOfRange { index: usize, len: usize },
    #[error("value {value} does not fit the {bits}-bit potential register")]
    PotentialOverflow { value: i128, bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuronParams {
    decay_exp: u32,
    theta_high: i64,
    theta_low: Option<i64>,
    potential_bits: Option<u32>,
}

impl NeuronParams {
    pub fn new(decay_exp: u32, theta_high: i64, theta_low: Option<i64>) -> Result<Self, NeuronError> {
        if decay_exp == 0 {
            return Err(NeuronError::InvalidDecay);
        }
        if theta_high <= 0 {
            return Err(NeuronError::InvalidThetaHigh(theta_high));
        }
        if let Some(low) = theta_low {
            if low >= 0 {
                return Err(NeuronError::InvalidThetaLow(low));
            }
        }
        Ok(Self {
            decay_exp,
            theta_high,
            theta_low,
            potential_bits: None,
        })
    }

    /// Bounded-width mode: the accumulator and the pre-reset potential must
    /// fit a signed register of `bits` bits, otherwise the update fails.
    pub fn with_potential_bits(mut self, bits: u32) -> Result<Self, NeuronError> {
        if !(2..=64).contains(&bits) {
            return Err(NeuronError::InvalidPotentialWidth(bits));
        }
        self.potential_bits = Some(bits);
        Ok(self)
    }

    pub fn decay_exp(&self) -> u32 {
        self.decay_exp
    }

    pub fn theta_high(&self) -> i64 {
        self.theta_high
    }

    pub fn theta_low(&self) -> Option<i64> {
        self.theta_low
    }

    pub fn potential_bits(&self) -> Option<u32> {
        self.potential_bits
    }

    fn check_width(&self, value: i128) -> Result<i64, NeuronError> {
        let bits = self.potential_bits.unwrap_or(64);
        let max = (1i128 << (bits - 1)) - 1;
        let min = -(1i128 << (bits - 1));
        if value < min || value > max {
            return Err(NeuronError::PotentialOverflow { value, bits });
        }
        Ok(value as i64)
    }
}

/// `floor(potential / 2^(decay_exp * dt))`.
pub fn decay_potential(potential: i64, decay_exp: u32, dt: u64) -> i64 {
    let shift = u64::from(decay_exp).saturating_mul(dt).min(63);
    potential >> shift
}

/// Reset-to-mod: subtracts the crossed threshold until the potential lies
/// strictly inside `(theta_low, theta_high)`. Returns the new potential and
/// the signed number of spikes fired.
pub fn apply_reset(potential: i64, params: &NeuronParams) -> (i64, i64) {
    let high = params.theta_high;
    if potential >= high {
        let fired = potential / high;
        return (potential - fired * high, fired);
    }
    match params.theta_low {
        Some(low) if potential <= low => {
            let fired = potential / low;
            (potential - fired * low, -fired)
        }
        _ => (potential, 0),
    }
}

/// One neuron of a layer: potential, weight row, last output spike time and
/// the per-event weight accumulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronState {
    pub potential: i64,
    pub weights: Vec<i32>,
    pub last_out_time: i64,
    pub accumulator: i64,
}

impl NeuronState {
    pub fn new(weights: Vec<i32>) -> Self {
        Self {
            potential: 0,
            weights,
            last_out_time: 0,
            accumulator: 0,
        }
    }

    /// Adds `sign * weights[synapse]` to the accumulator.
    pub fn accumulate(&mut self, synapse: usize, sign: i64, params: &NeuronParams) -> Result<(), NeuronError> {
        self.accumulate_count(synapse, sign, params)
    }

    /// Adds `count` same-time spikes on one synapse at once.
    pub fn accumulate_count(&mut self, synapse: usize, count: i64, params: &NeuronParams) -> Result<(), NeuronError> {
        let weight = *self.weights.get(synapse).ok_or(NeuronError::SynapseOutOfRange {
            index: synapse,
            len: self.weights.len(),
        })?;
        let sum = i128::from(self.accumulator) + i128::from(weight) * i128::from(count);
        self.accumulator = params.check_width(sum)?;
        Ok(())
    }

    /// Decay over `dt`, add the accumulator, reset, clear the accumulator.
    /// Returns the signed fire count.
    pub fn step(&mut self, params: &NeuronParams, dt: u64) -> Result<i64, NeuronError> {
        let decayed = decay_potential(self.potential, params.decay_exp, dt);
        let sum = params.check_width(i128::from(decayed) + i128::from(self.accumulator))?;
        let (potential, fired) = apply_reset(sum, params);
        self.potential = potential;
        self.accumulator = 0;
        Ok(fired)
    }
}
