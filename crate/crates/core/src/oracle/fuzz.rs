//! Random networks and sparse inputs for equivalence fuzzing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{to_delta_words, CodecError, DeltaStream, SpikeEvent, SpikeTrain, WordWidth};
use crate::network::{LayerSpec, NetSpec, NetworkError};

use super::{check_equivalence, EquivalenceReport};

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub layers: usize,
    pub min_inputs: usize,
    pub max_inputs: usize,
    pub min_neurons: usize,
    pub max_neurons: usize,
    /// Weights are drawn from `-weight_limit..=weight_limit`.
    pub weight_limit: i32,
    /// Fraction of weights forced to zero (cut synapses).
    pub zero_weight_fraction: f64,
    pub max_theta: i64,
    /// Probability that a layer also fires negative spikes.
    pub theta_low_probability: f64,
    pub decay_exps: Vec<u32>,
    pub max_spikes: usize,
    pub max_amplitude: i64,
    /// Spike times are drawn from `0..horizon` with `horizon <= max_horizon`.
    pub max_horizon: u64,
    pub widths: Vec<u32>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            min_inputs: 3,
            max_inputs: 20,
            min_neurons: 2,
            max_neurons: 10,
            weight_limit: 127,
            zero_weight_fraction: 0.25,
            max_theta: 64,
            theta_low_probability: 0.5,
            decay_exps: vec![1, 2, 3],
            max_spikes: 200,
            max_amplitude: 3,
            max_horizon: 600,
            widths: vec![4, 8],
        }
    }
}

/// A random network together with its input trains. The trains are kept in
/// absolute time so the same case can be encoded at any word width.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzCase {
    pub net: NetSpec,
    pub trains: Vec<SpikeTrain>,
}

impl FuzzCase {
    pub fn inputs(&self) -> Vec<DeltaStream> {
        self.inputs_at(self.net.width)
    }

    pub fn inputs_at(&self, width: WordWidth) -> Vec<DeltaStream> {
        self.trains.iter().map(|t| to_delta_words(t, width)).collect()
    }
}

pub fn case_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ trial)
}

pub fn random_layer<R: Rng>(
    rng: &mut R,
    cfg: &FuzzConfig,
    n_inputs: usize,
    n_neurons: usize,
    decay_exp: u32,
) -> LayerSpec {
    let weights = (0..n_inputs * n_neurons)
        .map(|_| {
            if rng.gen_bool(cfg.zero_weight_fraction) {
                0
            } else {
                rng.gen_range(-cfg.weight_limit..=cfg.weight_limit)
            }
        })
        .collect();
    let theta_high = rng.gen_range(1..=cfg.max_theta);
    let theta_low = rng
        .gen_bool(cfg.theta_low_probability)
        .then(|| -rng.gen_range(1..=cfg.max_theta));
    LayerSpec {
        n_inputs,
        n_neurons,
        decay_exp,
        theta_high,
        theta_low,
        weight_scale: theta_high,
        weights,
    }
}

pub fn random_trains<R: Rng>(rng: &mut R, cfg: &FuzzConfig, n_inputs: usize) -> Vec<SpikeTrain> {
    let horizon = rng.gen_range(1..=cfg.max_horizon);
    let spikes = rng.gen_range(0..=cfg.max_spikes);
    let mut lines: Vec<Vec<SpikeEvent>> = vec![Vec::new(); n_inputs];
    for _ in 0..spikes {
        let line = rng.gen_range(0..n_inputs);
        let magnitude = rng.gen_range(1..=cfg.max_amplitude);
        let amplitude = if rng.gen_bool(0.3) { -magnitude } else { magnitude };
        lines[line].push(SpikeEvent::new(rng.gen_range(0..horizon), amplitude));
    }
    lines
        .into_iter()
        .map(|mut events| {
            events.sort_by_key(|e| e.time);
            SpikeTrain::new(events).expect("sorted nonzero events")
        })
        .collect()
}

pub fn random_case<R: Rng>(rng: &mut R, cfg: &FuzzConfig) -> Result<FuzzCase, NetworkError> {
    let width_bits = *cfg.widths.choose(rng).expect("at least one width");
    let width = WordWidth::new(width_bits).map_err(NetworkError::Codec)?;
    let mut n_inputs = rng.gen_range(cfg.min_inputs..=cfg.max_inputs);
    let first_inputs = n_inputs;
    let mut layers = Vec::with_capacity(cfg.layers);
    for _ in 0..cfg.layers {
        let n_neurons = rng.gen_range(cfg.min_neurons..=cfg.max_neurons);
        let decay_exp = *cfg.decay_exps.choose(rng).expect("at least one decay exponent");
        layers.push(random_layer(rng, cfg, n_inputs, n_neurons, decay_exp));
        n_inputs = n_neurons;
    }
    let net = NetSpec::new(width, 1, layers)?;
    let trains = random_trains(rng, cfg, first_inputs);
    Ok(FuzzCase { net, trains })
}

/// Same case with every layer's decay exponent replaced.
pub fn with_decay(net: &NetSpec, decay_exp: u32) -> NetSpec {
    let mut out = net.clone();
    for layer in &mut out.layers {
        layer.decay_exp = decay_exp;
    }
    out
}

pub fn scaled_trains(trains: &[SpikeTrain], lambda: u64) -> Result<Vec<SpikeTrain>, CodecError> {
    trains.iter().map(|t| crate::codec::scale_times(t, lambda)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub trial: u64,
    pub report: EquivalenceReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub trials: u64,
    pub input_spikes: u64,
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Event engine vs dense oracle over `trials` random cases.
pub fn verify(seed: u64, trials: u64, cfg: &FuzzConfig) -> Result<VerifyReport, NetworkError> {
    let mut failures = Vec::new();
    let mut input_spikes = 0u64;
    for trial in 0..trials {
        let mut rng = case_rng(seed, trial);
        let case = random_case(&mut rng, cfg)?;
        input_spikes += case.trains.iter().map(|t| t.len() as u64).sum::<u64>();
        let report = check_equivalence(&case.net, &case.inputs())?;
        if !report.is_equivalent() {
            failures.push(Failure { trial, report });
        }
    }
    Ok(VerifyReport {
        trials,
        input_spikes,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_respect_config() {
        let cfg = FuzzConfig::default();
        for trial in 0..50 {
            let case = random_case(&mut case_rng(7, trial), &cfg).unwrap();
            assert_eq!(case.net.layers.len(), 2);
            let first = &case.net.layers[0];
            assert!((3..=20).contains(&first.n_inputs));
            assert!(case.net.layers.iter().all(|l| (2..=10).contains(&l.n_neurons)));
            assert!(case.net.layers.iter().all(|l| (1..=64).contains(&l.theta_high)));
            assert!(case.net.layers.iter().flat_map(|l| &l.weights).all(|w| w.abs() <= 127));
            assert!([4, 8].contains(&case.net.width.bits()));
            assert!(case.trains.iter().map(|t| t.len()).sum::<usize>() <= 200);
        }
    }

    #[test]
    fn seeded_cases_repeat() {
        let cfg = FuzzConfig::default();
        let a = random_case(&mut case_rng(3, 11), &cfg).unwrap();
        let b = random_case(&mut case_rng(3, 11), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_verify_run_passes() {
        let report = verify(1, 20, &FuzzConfig::default()).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
    }
}
