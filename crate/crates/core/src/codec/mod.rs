//! Spike trains and their differential-time word encoding.
//!
//! A [`SpikeTrain`] holds absolute event times with signed integer
//! amplitudes. A [`DeltaStream`] holds the same information as a sequence of
//! `b`-bit sign-magnitude words, each carrying the time elapsed since the
//! previous word. The all-ones pattern is reserved as an overflow word that
//! only advances time by [`WordWidth::overflow_span`] ticks.
//!
//! Amplitudes larger than one are folded into a leading signed word followed
//! by zero-delta words of the same sign, so `(t=0, a=+2)` encodes as
//! `+0 +0`.

mod file;

pub use file::{format_text, parse_text, read_dts, read_dts_blocks, write_dts};

use std::fmt;

use thiserror::Error;

/// Relative slack used when testing a residual against the level-crossing
/// threshold, so that `0.3 / 0.05` counts as six crossings despite rounding.
const CROSSING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("empty signal")]
    EmptySignal,
    #[error("invalid threshold")]
    InvalidThreshold,
    #[error("invalid word width {0}: must be between {min} and {max} bits", min = WordWidth::MIN, max = WordWidth::MAX)]
    InvalidWidth(u32),
    #[error("time scale factor must be at least 1")]
    InvalidScale,
    #[error("event time overflows the time range")]
    TimeOverflow,
    #[error("event {index} has a time earlier than its predecessor")]
    NotMonotonic { index: usize },
    #[error("event {index} has zero amplitude")]
    ZeroAmplitude { index: usize },
    #[error("word {raw:#x} is not a valid {width}-bit delta word")]
    InvalidWord { raw: u32, width: u32 },
    #[error("stream widths differ: {0} vs {1}")]
    WidthMismatch(u32, u32),
    #[error("bad magic")]
    BadMagic,
    #[error("truncated stream file")]
    Truncated,
    #[error("malformed text token `{0}`")]
    BadToken(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CodecError {
    fn from(err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::UnexpectedEof {
            CodecError::Truncated
        } else {
            CodecError::Io(err.to_string())
        }
    }
}

/// Bit width `b` of a delta word: one sign bit plus `b - 1` magnitude bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordWidth(u32);

impl WordWidth {
    pub const MIN: u32 = 3;
    /// Words are stored one per `u16` in the binary stream format.
    pub const MAX: u32 = 16;

    pub fn new(bits: u32) -> Result<Self, CodecError> {
        if (Self::MIN..=Self::MAX).contains(&bits) {
            Ok(Self(bits))
        } else {
            Err(CodecError::InvalidWidth(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Ticks advanced by one overflow word, `2^(b-1) - 1`.
    pub fn overflow_span(self) -> u64 {
        (1u64 << (self.0 - 1)) - 1
    }

    /// Largest magnitude the encoder places in a data word. Both signs are
    /// capped one below the overflow span so encoding stays sign-symmetric.
    pub fn max_data_magnitude(self) -> u64 {
        self.overflow_span() - 1
    }

    fn magnitude_mask(self) -> u32 {
        (1u32 << (self.0 - 1)) - 1
    }

    fn overflow_code(self) -> u32 {
        (1u32 << self.0) - 1
    }
}

impl fmt::Display for WordWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One differential-time word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeltaWord {
    /// A spike of unit amplitude `magnitude` ticks after the previous word.
    Data { negative: bool, magnitude: u32 },
    /// Timer overflow: time passes, nothing else happens.
    Overflow,
}

impl DeltaWord {
    pub fn positive(magnitude: u32) -> Self {
        DeltaWord::Data {
            negative: false,
            magnitude,
        }
    }

    pub fn negative(magnitude: u32) -> Self {
        DeltaWord::Data {
            negative: true,
            magnitude,
        }
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, DeltaWord::Overflow)
    }

    /// `+1` or `-1` for data words, `0` for overflow.
    pub fn sign(self) -> i64 {
        match self {
            DeltaWord::Data { negative: true, .. } => -1,
            DeltaWord::Data { negative: false, .. } => 1,
            DeltaWord::Overflow => 0,
        }
    }

    /// Ticks this word advances the stream clock by.
    pub fn advance(self, width: WordWidth) -> u64 {
        match self {
            DeltaWord::Data { magnitude, .. } => u64::from(magnitude),
            DeltaWord::Overflow => width.overflow_span(),
        }
    }

    pub fn from_raw(raw: u32, width: WordWidth) -> Result<Self, CodecError> {
        if raw > width.overflow_code() {
            return Err(CodecError::InvalidWord {
                raw,
                width: width.bits(),
            });
        }
        if raw == width.overflow_code() {
            return Ok(DeltaWord::Overflow);
        }
        Ok(DeltaWord::Data {
            negative: raw >> (width.bits() - 1) & 1 == 1,
            magnitude: raw & width.magnitude_mask(),
        })
    }

    pub fn to_raw(self, width: WordWidth) -> Result<u32, CodecError> {
        match self {
            DeltaWord::Overflow => Ok(width.overflow_code()),
            DeltaWord::Data { negative, magnitude } => {
                let raw = (u32::from(negative) << (width.bits() - 1)) | magnitude;
                if magnitude > width.magnitude_mask() || raw == width.overflow_code() {
                    return Err(CodecError::InvalidWord {
                        raw,
                        width: width.bits(),
                    });
                }
                Ok(raw)
            }
        }
    }
}

impl fmt::Display for DeltaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaWord::Overflow => f.write_str("OV"),
            DeltaWord::Data { negative, magnitude } => write!(f, "{}{}", if *negative { '-' } else { '+' }, magnitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpikeEvent {
    pub time: u64,
    pub amplitude: i64,
}

impl SpikeEvent {
    pub fn new(time: u64, amplitude: i64) -> Self {
        Self { time, amplitude }
    }
}

/// Absolute-time spike sequence with nonzero signed integer amplitudes and
/// non-decreasing times.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpikeTrain {
    events: Vec<SpikeEvent>,
}

impl SpikeTrain {
    pub fn new(events: Vec<SpikeEvent>) -> Result<Self, CodecError> {
        for (index, event) in events.iter().enumerate() {
            if event.amplitude == 0 {
                return Err(CodecError::ZeroAmplitude { index });
            }
            if index > 0 && event.time < events[index - 1].time {
                return Err(CodecError::NotMonotonic { index });
            }
        }
        Ok(Self { events })
    }

    pub fn from_pairs(pairs: &[(u64, i64)]) -> Result<Self, CodecError> {
        Self::new(pairs.iter().map(|&(t, a)| SpikeEvent::new(t, a)).collect())
    }

    pub fn events(&self) -> &[SpikeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sum of the amplitudes of all positive events.
    pub fn positive_amplitude(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| e.amplitude > 0)
            .map(|e| e.amplitude.unsigned_abs())
            .sum()
    }

    /// Canonical form: consecutive events sharing a time and a sign are
    /// merged into one event.
    pub fn merged(&self) -> SpikeTrain {
        let mut events: Vec<SpikeEvent> = Vec::with_capacity(self.events.len());
        for &event in &self.events {
            match events.last_mut() {
                Some(last) if last.time == event.time && last.amplitude.signum() == event.amplitude.signum() => {
                    last.amplitude += event.amplitude;
                }
                _ => events.push(event),
            }
        }
        SpikeTrain { events }
    }
}

/// Sequence of delta words of one fixed width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaStream {
    width: WordWidth,
    words: Vec<DeltaWord>,
}

impl DeltaStream {
    pub fn empty(width: WordWidth) -> Self {
        Self {
            width,
            words: Vec::new(),
        }
    }

    pub fn new(width: WordWidth, words: Vec<DeltaWord>) -> Result<Self, CodecError> {
        for word in &words {
            word.to_raw(width)?;
        }
        Ok(Self { width, words })
    }

    pub fn from_raw(width: WordWidth, raw: &[u32]) -> Result<Self, CodecError> {
        let words = raw
            .iter()
            .map(|&r| DeltaWord::from_raw(r, width))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { width, words })
    }

    pub fn width(&self) -> WordWidth {
        self.width
    }

    pub fn words(&self) -> &[DeltaWord] {
        &self.words
    }

    pub fn into_words(self) -> Vec<DeltaWord> {
        self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn overflow_count(&self) -> usize {
        self.words.iter().filter(|w| w.is_overflow()).count()
    }

    /// Total ticks covered by the stream, trailing overflow words included.
    pub fn span(&self) -> u64 {
        self.words.iter().map(|w| w.advance(self.width)).sum()
    }

    pub fn raw_words(&self) -> Vec<u32> {
        self.words
            .iter()
            .map(|w| {
                w.to_raw(self.width)
                    .expect("stream words are validated on construction")
            })
            .collect()
    }

    /// Emits as many overflow words as fit in `ticks` and returns the ticks
    /// they cover (a multiple of the overflow span).
    pub fn push_idle(&mut self, ticks: u64) -> u64 {
        let span = self.width.overflow_span();
        let count = ticks / span;
        self.words
            .extend(std::iter::repeat_n(DeltaWord::Overflow, count as usize));
        count * span
    }

    /// Appends one event `delta` ticks after the previous data position:
    /// overflow words first, then the signed word, then `|amplitude| - 1`
    /// zero-delta words of the same sign. Returns the number of words added.
    pub fn push_event(&mut self, delta: u64, amplitude: i64) -> usize {
        debug_assert!(amplitude != 0);
        let before = self.words.len();
        let covered = self.push_idle(delta);
        let negative = amplitude < 0;
        let residual = (delta - covered) as u32;
        self.words.push(DeltaWord::Data {
            negative,
            magnitude: residual,
        });
        let extra = amplitude.unsigned_abs() - 1;
        self.words.extend(std::iter::repeat_n(
            DeltaWord::Data { negative, magnitude: 0 },
            extra as usize,
        ));
        self.words.len() - before
    }

    pub fn push(&mut self, word: DeltaWord) -> Result<(), CodecError> {
        word.to_raw(self.width)?;
        self.words.push(word);
        Ok(())
    }

    pub fn decode(&self) -> SpikeTrain {
        from_delta_words(self)
    }
}

/// Level-crossing delta modulation of a sampled signal.
///
/// The residual change since the last emitted event is carried forward; an
/// event of amplitude `trunc(residual / theta)` is emitted at sample index
/// `p` whenever that quotient is nonzero.
pub fn delta_encode_signal(samples: &[f64], theta: f64) -> Result<SpikeTrain, CodecError> {
    if samples.is_empty() {
        return Err(CodecError::EmptySignal);
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(CodecError::InvalidThreshold);
    }
    let mut residual = 0.0f64;
    let mut events = Vec::new();
    for (p, pair) in samples.windows(2).enumerate() {
        residual += pair[1] - pair[0];
        let ratio = residual / theta;
        let crossings = (ratio + CROSSING_TOLERANCE.copysign(ratio)).trunc();
        if crossings != 0.0 {
            events.push(SpikeEvent::new(p as u64 + 1, crossings as i64));
            residual -= crossings * theta;
        }
    }
    Ok(SpikeTrain { events })
}

pub fn to_delta_words(train: &SpikeTrain, width: WordWidth) -> DeltaStream {
    let mut stream = DeltaStream::empty(width);
    let mut previous = 0u64;
    for event in train.events() {
        stream.push_event(event.time - previous, event.amplitude);
        previous = event.time;
    }
    stream
}

/// Decodes any word sequence. Consecutive same-sign words landing on the same
/// tick merge into one event.
pub fn from_delta_words(stream: &DeltaStream) -> SpikeTrain {
    let width = stream.width();
    let mut time = 0u64;
    let mut events: Vec<SpikeEvent> = Vec::new();
    for &word in stream.words() {
        time += word.advance(width);
        if word.is_overflow() {
            continue;
        }
        let sign = word.sign();
        match events.last_mut() {
            Some(last) if last.time == time && last.amplitude.signum() == sign => {
                last.amplitude += sign;
            }
            _ => events.push(SpikeEvent::new(time, sign)),
        }
    }
    SpikeTrain { events }
}

/// Multiplies every event time by `lambda`.
pub fn scale_times(train: &SpikeTrain, lambda: u64) -> Result<SpikeTrain, CodecError> {
    if lambda == 0 {
        return Err(CodecError::InvalidScale);
    }
    let events = train
        .events()
        .iter()
        .map(|e| {
            e.time
                .checked_mul(lambda)
                .map(|time| SpikeEvent::new(time, e.amplitude))
                .ok_or(CodecError::TimeOverflow)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpikeTrain { events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(bits: u32) -> WordWidth {
        WordWidth::new(bits).unwrap()
    }

    fn train(pairs: &[(u64, i64)]) -> SpikeTrain {
        SpikeTrain::from_pairs(pairs).unwrap()
    }

    /// Accumulate-and-threshold by brute force: counts crossings one unit at
    /// a time instead of dividing.
    fn brute_force_encode(samples: &[f64], theta: f64) -> Vec<(u64, i64)> {
        let mut residual = 0.0;
        let mut out = Vec::new();
        for p in 1..samples.len() {
            residual += samples[p] - samples[p - 1];
            let mut amp = 0i64;
            while residual >= theta * (1.0 - 1e-9) {
                residual -= theta;
                amp += 1;
            }
            while residual <= -theta * (1.0 - 1e-9) {
                residual += theta;
                amp -= 1;
            }
            if amp != 0 {
                out.push((p as u64, amp));
            }
        }
        out
    }

    #[test]
    fn constant_signal_is_silent() {
        let t = delta_encode_signal(&[0.5, 0.5, 0.5], 0.05).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn single_step_crosses_six_times() {
        let samples = [0.0, 0.3];
        assert_eq!(brute_force_encode(&samples, 0.05), vec![(1, 6)]);
        let t = delta_encode_signal(&samples, 0.05).unwrap();
        assert_eq!(t, train(&[(1, 6)]));
    }

    #[test]
    fn residual_carries_forward() {
        let samples = [0.0, 0.04, 0.08];
        assert_eq!(brute_force_encode(&samples, 0.05), vec![(2, 1)]);
        assert_eq!(delta_encode_signal(&samples, 0.05).unwrap(), train(&[(2, 1)]));
    }

    #[test]
    fn encoder_rejects_bad_input() {
        assert_eq!(delta_encode_signal(&[], 0.05), Err(CodecError::EmptySignal));
        assert_eq!(delta_encode_signal(&[0.0, 1.0], 0.0), Err(CodecError::InvalidThreshold));
        assert_eq!(
            delta_encode_signal(&[0.0, 1.0], -0.1),
            Err(CodecError::InvalidThreshold)
        );
    }

    #[test]
    fn plain_deltas() {
        let t = train(&[(2, 1), (5, 1), (5, 1), (9, 1)]);
        let s = to_delta_words(&t, w(8));
        assert_eq!(
            s.words(),
            &[
                DeltaWord::positive(2),
                DeltaWord::positive(3),
                DeltaWord::positive(0),
                DeltaWord::positive(4)
            ]
        );
        assert_eq!(s.decode(), train(&[(2, 1), (5, 2), (9, 1)]));
    }

    #[test]
    fn long_gap_uses_overflow_word() {
        let s = to_delta_words(&train(&[(10, 1)]), w(4));
        assert_eq!(s.words(), &[DeltaWord::Overflow, DeltaWord::positive(3)]);
        assert_eq!(s.decode(), train(&[(10, 1)]));
    }

    #[test]
    fn amplitude_two_folds_into_zero_word() {
        let s = to_delta_words(&train(&[(0, 2)]), w(8));
        assert_eq!(s.words(), &[DeltaWord::positive(0), DeltaWord::positive(0)]);
    }

    #[test]
    fn overflow_only_before_sign_word() {
        // 7 + 7 + 2 = 16, amplitude -3
        let s = to_delta_words(&train(&[(16, -3)]), w(4));
        assert_eq!(
            s.words(),
            &[
                DeltaWord::Overflow,
                DeltaWord::Overflow,
                DeltaWord::negative(2),
                DeltaWord::negative(0),
                DeltaWord::negative(0)
            ]
        );
    }

    #[test]
    fn exact_multiple_of_span_leaves_zero_residual() {
        let s = to_delta_words(&train(&[(7, 1)]), w(4));
        assert_eq!(s.words(), &[DeltaWord::Overflow, DeltaWord::positive(0)]);
        assert_eq!(s.decode(), train(&[(7, 1)]));
    }

    #[test]
    fn empty_stream_decodes_empty() {
        assert!(DeltaStream::empty(w(8)).decode().is_empty());
    }

    #[test]
    fn raw_layout() {
        let b = w(4);
        assert_eq!(DeltaWord::positive(3).to_raw(b).unwrap(), 0b0011);
        assert_eq!(DeltaWord::negative(3).to_raw(b).unwrap(), 0b1011);
        assert_eq!(DeltaWord::Overflow.to_raw(b).unwrap(), 0b1111);
        assert_eq!(DeltaWord::from_raw(0b1111, b).unwrap(), DeltaWord::Overflow);
        assert_eq!(DeltaWord::from_raw(0b1000, b).unwrap(), DeltaWord::negative(0));
        // sign=1, magnitude=max is the overflow code, never a data word
        assert!(DeltaWord::negative(7).to_raw(b).is_err());
        // positive max magnitude is decodable even though the encoder avoids it
        assert_eq!(DeltaWord::from_raw(0b0111, b).unwrap(), DeltaWord::positive(7));
        assert!(DeltaWord::from_raw(0b1_0000, b).is_err());
    }

    #[test]
    fn width_bounds() {
        assert_eq!(WordWidth::new(2), Err(CodecError::InvalidWidth(2)));
        assert_eq!(WordWidth::new(17), Err(CodecError::InvalidWidth(17)));
        assert_eq!(w(3).overflow_span(), 3);
        assert_eq!(w(8).overflow_span(), 127);
    }

    #[test]
    fn train_validation() {
        assert_eq!(
            SpikeTrain::from_pairs(&[(3, 1), (2, 1)]),
            Err(CodecError::NotMonotonic { index: 1 })
        );
        assert_eq!(
            SpikeTrain::from_pairs(&[(3, 0)]),
            Err(CodecError::ZeroAmplitude { index: 0 })
        );
    }

    #[test]
    fn scaling() {
        let t = train(&[(2, 1), (5, -1)]);
        assert_eq!(scale_times(&t, 2).unwrap(), train(&[(4, 1), (10, -1)]));
        assert_eq!(scale_times(&t, 1).unwrap(), t);
        assert_eq!(scale_times(&train(&[(1, 3)]), 4).unwrap(), train(&[(4, 3)]));
        assert_eq!(scale_times(&t, 0), Err(CodecError::InvalidScale));
        assert_eq!(
            scale_times(&train(&[(u64::MAX / 2 + 1, 1)]), 2),
            Err(CodecError::TimeOverflow)
        );
    }

    fn arb_train() -> impl Strategy<Value = SpikeTrain> {
        prop::collection::vec((0u64..300, prop_oneof![-4i64..=-1, 1i64..=4]), 0..40).prop_map(|raw| {
            let mut time = 0;
            let events = raw
                .into_iter()
                .map(|(gap, amp)| {
                    time += gap;
                    SpikeEvent::new(time, amp)
                })
                .collect();
            SpikeTrain::new(events).unwrap()
        })
    }

    proptest! {
        #[test]
        fn roundtrip_is_merge(t in arb_train(), bits in 3u32..=16) {
            let s = to_delta_words(&t, w(bits));
            prop_assert_eq!(s.decode(), t.merged());
        }

        #[test]
        fn reencoding_is_canonical(t in arb_train(), bits in 3u32..=16) {
            let s = to_delta_words(&t, w(bits));
            prop_assert_eq!(to_delta_words(&s.decode(), w(bits)), s);
        }

        #[test]
        fn overflow_count_is_minimal(t in arb_train(), bits in 3u32..=16) {
            let b = w(bits);
            let s = to_delta_words(&t, b);
            let mut prev = 0;
            let mut expected = 0u64;
            for e in t.events() {
                expected += (e.time - prev) / b.overflow_span();
                prev = e.time;
            }
            prop_assert_eq!(s.overflow_count() as u64, expected);
        }

        #[test]
        fn raw_words_roundtrip(t in arb_train(), bits in 3u32..=16) {
            let s = to_delta_words(&t, w(bits));
            prop_assert_eq!(DeltaStream::from_raw(w(bits), &s.raw_words()).unwrap(), s);
        }

        #[test]
        fn encoder_residual_is_bounded(
            samples in prop::collection::vec(0.0f64..=1.0, 1..100),
            theta in 0.01f64..0.5,
        ) {
            let t = delta_encode_signal(&samples, theta).unwrap();
            let emitted: i64 = t.events().iter().map(|e| e.amplitude).sum();
            let change = samples[samples.len() - 1] - samples[0];
            prop_assert!((change - emitted as f64 * theta).abs() < theta);
        }
    }
}
