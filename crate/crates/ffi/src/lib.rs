//! C interface to the dtsnn simulator.
//!
//! Every fallible function returns a [`DtsStatus`]. On failure a message is
//! stored per thread and can be read with [`dts_last_error`]. Networks are
//! opaque [`DtsNetwork`] handles released with [`dts_network_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dtsnn::codec::{to_delta_words, DeltaStream, SpikeEvent, SpikeTrain, WordWidth};
use dtsnn::dataset::encode_image;
use dtsnn::netspec::NetSpecFile;
use dtsnn::network::{present_input, run_network, NetSpec};
use dtsnn::oracle::fuzz::{verify, FuzzConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Simulation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque network handle.
pub struct DtsNetwork {
    net: NetSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(DtsStatus, String);

impl Failure {
    fn new(status: DtsStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DtsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DtsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DtsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(DtsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(())
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output_slice<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

fn width(bits: u32) -> Result<WordWidth, Failure> {
    WordWidth::new(bits).map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

fn load_network(file: NetSpecFile, bits: u32) -> Result<NetSpec, Failure> {
    let bits = (bits != 0).then_some(bits);
    file.to_netspec(bits).map_err(|e| Failure::new(DtsStatus::Parse, e))
}

unsafe fn store_network(out: *mut *mut DtsNetwork, net: NetSpec) {
    *out = Box::into_raw(Box::new(DtsNetwork { net }));
}

/// Loads a netspec JSON file. `bits` selects the quantization width for
/// float-only files; pass 0 for integer files.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dts_network_load(path: *const c_char, bits: u32, out: *mut *mut DtsNetwork) -> DtsStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))?;
        let file = NetSpecFile::load(path).map_err(|e| match e {
            dtsnn::netspec::NetSpecError::Io { .. } => Failure::new(DtsStatus::Io, e),
            other => Failure::new(DtsStatus::Parse, other),
        })?;
        store_network(out, load_network(file, bits)?);
        Ok(())
    })
}

/// Same as [`dts_network_load`] but from an in-memory JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dts_network_from_json(json: *const c_char, bits: u32, out: *mut *mut DtsNetwork) -> DtsStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))?;
        let file = NetSpecFile::from_json(text).map_err(|e| Failure::new(DtsStatus::Parse, e))?;
        store_network(out, load_network(file, bits)?);
        Ok(())
    })
}

/// # Safety
/// `net` must come from a load function and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dts_network_free(net: *mut DtsNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a valid handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn dts_network_n_inputs(net: *const DtsNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.n_inputs())
}

/// # Safety
/// `net` must be a valid handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn dts_network_n_outputs(net: *const DtsNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.n_outputs())
}

/// Presents line amplitudes for the network's repetition count and
/// classifies. `counts` receives one positive spike count per output neuron
/// and must hold `n_outputs` entries. `label` and `cycles` may be NULL.
///
/// # Safety
/// Buffers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn dts_network_infer(
    net: *const DtsNetwork,
    amplitudes: *const i64,
    n_amplitudes: usize,
    counts: *mut u64,
    n_counts: usize,
    label: *mut usize,
    cycles: *mut u64,
) -> DtsStatus {
    guard(|| {
        non_null(net, "net")?;
        let net = &(*net).net;
        let amplitudes = input_slice(amplitudes, n_amplitudes, "amplitudes")?;
        if n_amplitudes != net.n_inputs() {
            return Err(Failure::new(
                DtsStatus::InvalidArgument,
                format!("expected {} amplitudes, got {n_amplitudes}", net.n_inputs()),
            ));
        }
        if n_counts < net.n_outputs() {
            return Err(Failure::new(
                DtsStatus::BufferTooSmall,
                format!("counts needs {} entries", net.n_outputs()),
            ));
        }
        let counts = output_slice(counts, n_counts, "counts")?;
        let simulation = |e: dtsnn::network::NetworkError| Failure::new(DtsStatus::Simulation, e);
        let inputs = present_input(amplitudes, net.repetitions, net.width).map_err(simulation)?;
        let result = run_network(net, &inputs).map_err(simulation)?;
        counts[..result.output_counts.len()].copy_from_slice(&result.output_counts);
        if !label.is_null() {
            *label = result.label;
        }
        if !cycles.is_null() {
            *cycles = result.total_cycles;
        }
        Ok(())
    })
}

/// Level-crossing encodes `n_pixels` values in `[0, 1]` at `theta`.
/// `amplitudes` receives `n_pixels` signed event amplitudes.
///
/// # Safety
/// Both buffers must hold `n_pixels` entries.
#[no_mangle]
pub unsafe extern "C" fn dts_encode_image(
    pixels: *const f64,
    n_pixels: usize,
    theta: f64,
    amplitudes: *mut i64,
) -> DtsStatus {
    guard(|| {
        let pixels = input_slice(pixels, n_pixels, "pixels")?;
        let out = output_slice(amplitudes, n_pixels, "amplitudes")?;
        let q = encode_image(pixels, theta).map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))?;
        out.copy_from_slice(&q);
        Ok(())
    })
}

/// Encodes a spike train (ascending times, nonzero amplitudes) into raw delta
/// words of `width_bits`. `written` always receives the required word count;
/// `DTS_STATUS_BUFFER_TOO_SMALL` is returned when `capacity` is short.
///
/// # Safety
/// `times` and `amplitudes` must hold `n_events` entries, `words` `capacity`.
#[no_mangle]
pub unsafe extern "C" fn dts_delta_encode(
    times: *const u64,
    amplitudes: *const i64,
    n_events: usize,
    width_bits: u32,
    words: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> DtsStatus {
    guard(|| {
        non_null(written, "written")?;
        let width = width(width_bits)?;
        let times = input_slice(times, n_events, "times")?;
        let amplitudes = input_slice(amplitudes, n_events, "amplitudes")?;
        let events = times
            .iter()
            .zip(amplitudes)
            .map(|(&t, &a)| SpikeEvent::new(t, a))
            .collect();
        let train = SpikeTrain::new(events).map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))?;
        let raw = to_delta_words(&train, width).raw_words();
        *written = raw.len();
        if capacity < raw.len() {
            return Err(Failure::new(
                DtsStatus::BufferTooSmall,
                format!("{} words required", raw.len()),
            ));
        }
        output_slice(words, raw.len(), "words")?.copy_from_slice(&raw);
        Ok(())
    })
}

/// Decodes raw delta words into `(time, amplitude)` events. `written` always
/// receives the event count.
///
/// # Safety
/// `words` must hold `n_words` entries, `times` and `amplitudes` `capacity`.
#[no_mangle]
pub unsafe extern "C" fn dts_delta_decode(
    words: *const u32,
    n_words: usize,
    width_bits: u32,
    times: *mut u64,
    amplitudes: *mut i64,
    capacity: usize,
    written: *mut usize,
) -> DtsStatus {
    guard(|| {
        non_null(written, "written")?;
        let width = width(width_bits)?;
        let raw = input_slice(words, n_words, "words")?;
        let stream = DeltaStream::from_raw(width, raw).map_err(|e| Failure::new(DtsStatus::InvalidArgument, e))?;
        let train = stream.decode();
        *written = train.len();
        if capacity < train.len() {
            return Err(Failure::new(
                DtsStatus::BufferTooSmall,
                format!("{} events required", train.len()),
            ));
        }
        let times = output_slice(times, train.len(), "times")?;
        let amplitudes = output_slice(amplitudes, train.len(), "amplitudes")?;
        for (i, event) in train.events().iter().enumerate() {
            times[i] = event.time;
            amplitudes[i] = event.amplitude;
        }
        Ok(())
    })
}

/// Runs `trials` random networks through both the event engine and the
/// dense reference and stores the number of diverging trials in `failures`.
///
/// # Safety
/// `failures` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dts_verify(seed: u64, trials: u64, failures: *mut u64) -> DtsStatus {
    guard(|| {
        non_null(failures, "failures")?;
        let report =
            verify(seed, trials, &FuzzConfig::default()).map_err(|e| Failure::new(DtsStatus::Simulation, e))?;
        *failures = report.failures.len() as u64;
        Ok(())
    })
}
