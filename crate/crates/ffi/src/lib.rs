//! C ABI for the simulator.
//!
//! Networks are opaque `MtjNetwork` handles created by one of the
//! `mtj_network_new_*` functions and released with `mtj_network_free`.
//! Every fallible function returns an `MtjStatus`; on failure the message
//! is available from `mtj_last_error_message` on the same thread.
//! Input images are arrays of bytes, one per pixel, nonzero meaning active.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use mtj_snn::{snapshot, Error, InputVector, Network, NeuronParams, RunConfig};

/// Opaque network handle.
pub struct MtjNetwork {
    net: Network,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Io = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> MtjStatus {
    match e {
        Error::Argument(_) => MtjStatus::InvalidArgument,
        Error::Config { .. } => MtjStatus::Config,
        Error::Parse { .. } => MtjStatus::Parse,
        Error::Io { .. } => MtjStatus::Io,
    }
}

struct Fail(MtjStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MtjStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MtjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtjStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MtjStatus::Panic
        }
    }
}

unsafe fn network<'a>(h: *const MtjNetwork) -> Result<&'a Network, Fail> {
    h.as_ref().map(|h| &h.net).ok_or_else(|| null("network"))
}

unsafe fn network_mut<'a>(h: *mut MtjNetwork) -> Result<&'a mut Network, Fail> {
    h.as_mut().map(|h| &mut h.net).ok_or_else(|| null("network"))
}

unsafe fn input(bits: *const u8, len: usize) -> Result<InputVector, Fail> {
    if bits.is_null() {
        return Err(null("input"));
    }
    Ok(InputVector::new(slice::from_raw_parts(bits, len).iter().map(|&b| b != 0).collect()))
}

unsafe fn config_from_text(text: *const c_char) -> Result<RunConfig, Fail> {
    let mut cfg = RunConfig::default();
    if !text.is_null() {
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Fail(MtjStatus::InvalidArgument, "config text is not UTF-8".into()))?;
        cfg.apply_text(s, "<config>")?;
    }
    Ok(cfg)
}

fn publish(out: *mut *mut MtjNetwork, net: Network) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(MtjNetwork { net })) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mtj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn mtj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Network with default parameters and every synapse randomly P or AP.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_new_random(n_out: usize, n_in: usize, replicas: usize, seed: u64, out: *mut *mut MtjNetwork) -> MtjStatus {
    guard(|| {
        let net = Network::init_random(n_out, n_in, replicas, Default::default(), seed)?;
        publish(out, net)
    })
}

/// Randomly initialized network from `key = value` config text applied
/// over the defaults (`n_out`, `replicas`, `seed` and all model
/// parameters; `theta0 = auto` means 1.0). `config_text` may be null.
///
/// # Safety
/// `config_text` must be null or a NUL-terminated string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_new_from_config(config_text: *const c_char, n_in: usize, out: *mut *mut MtjNetwork) -> MtjStatus {
    guard(|| {
        let cfg = config_from_text(config_text)?;
        let params = cfg.network_params(NeuronParams::default().theta0)?;
        let net = Network::init_random(cfg.n_out, n_in, cfg.replicas, params, cfg.seed)?;
        publish(out, net)
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_free(net: *mut MtjNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_dims(net: *const MtjNetwork, n_out: *mut usize, n_in: *mut usize, replicas: *mut usize) -> MtjStatus {
    guard(|| {
        let net = network(net)?;
        for (p, v) in [(n_out, net.n_out()), (n_in, net.n_in()), (replicas, net.array().replicas())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Program every replica of `row` to `pattern` (P where active).
///
/// # Safety
/// `pattern` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_program_row(net: *mut MtjNetwork, row: usize, pattern: *const u8, len: usize) -> MtjStatus {
    guard(|| {
        let net = network_mut(net)?;
        let pattern = input(pattern, len)?;
        net.array_mut().program(row, &pattern)?;
        Ok(())
    })
}

/// Noise-free post-subtraction dendrite outputs, `n_out` values.
///
/// # Safety
/// `image` must point to `len` bytes and `outputs` to `outputs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_outputs(
    net: *const MtjNetwork,
    image: *const u8,
    len: usize,
    outputs: *mut f64,
    outputs_len: usize,
) -> MtjStatus {
    guard(|| {
        let net = network(net)?;
        let image = input(image, len)?;
        if outputs.is_null() {
            return Err(null("outputs"));
        }
        if outputs_len != net.n_out() {
            return Err(Fail(
                MtjStatus::InvalidArgument,
                format!("outputs_len {outputs_len} != n_out {}", net.n_out()),
            ));
        }
        let o = net.outputs(&image, None)?;
        slice::from_raw_parts_mut(outputs, outputs_len).copy_from_slice(&o);
        Ok(())
    })
}

/// Present one image for up to `max_cycles` cycles. `winner` receives the
/// firing neuron or -1 on timeout; `switched` the number of synapses that
/// changed state. Output pointers may be null.
///
/// # Safety
/// `image` must point to `len` bytes; output pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_present(
    net: *mut MtjNetwork,
    image: *const u8,
    len: usize,
    learn: bool,
    max_cycles: usize,
    winner: *mut i64,
    cycles: *mut usize,
    switched: *mut usize,
) -> MtjStatus {
    guard(|| {
        let net = network_mut(net)?;
        let image = input(image, len)?;
        let res = net.present(&image, learn, max_cycles)?;
        if !winner.is_null() {
            *winner = res.winner.map_or(-1, |w| w as i64);
        }
        if !cycles.is_null() {
            *cycles = res.cycles_elapsed;
        }
        if !switched.is_null() {
            *switched = res.switched();
        }
        Ok(())
    })
}

/// Serialize to the snapshot format. Release the buffer with
/// `mtj_bytes_free`.
///
/// # Safety
/// `bytes` and `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_snapshot_save(net: *const MtjNetwork, bytes: *mut *mut u8, len: *mut usize) -> MtjStatus {
    guard(|| {
        let net = network(net)?;
        if bytes.is_null() || len.is_null() {
            return Err(null("bytes/len"));
        }
        let buf = snapshot::save(net).into_boxed_slice();
        *len = buf.len();
        *bytes = Box::into_raw(buf).cast();
        Ok(())
    })
}

/// Restore a snapshot. Model parameters come from `config_text` (may be
/// null for defaults); dimensions and state come from the snapshot.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; see `mtj_network_new_from_config`.
#[no_mangle]
pub unsafe extern "C" fn mtj_network_snapshot_load(
    bytes: *const u8,
    len: usize,
    config_text: *const c_char,
    out: *mut *mut MtjNetwork,
) -> MtjStatus {
    guard(|| {
        if bytes.is_null() {
            return Err(null("bytes"));
        }
        let cfg = config_from_text(config_text)?;
        let params = cfg.network_params(NeuronParams::default().theta0)?;
        let net = snapshot::load(slice::from_raw_parts(bytes, len), params, "<snapshot>")?;
        publish(out, net)
    })
}

/// Free a buffer from `mtj_network_snapshot_save`. Null is ignored.
///
/// # Safety
/// `bytes`/`len` must be exactly as returned and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtj_bytes_free(bytes: *mut u8, len: usize) {
    if !bytes.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(bytes, len)));
    }
}
