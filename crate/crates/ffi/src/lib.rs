//! C ABI for deepsith.
//!
//! Every fallible function returns a [`DsStatus`]; on failure the message is
//! available from [`ds_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Arrays are row-major
//! `double` buffers passed with an explicit element count; a function that
//! fills a buffer checks the count and reports `DS_STATUS_SHAPE_MISMATCH` if
//! it is wrong.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use deepsith::experiment::presets;
use deepsith::filterbank::{build_kernels, geometric_taus, select_k, FilterBank, FilterSpec};
use deepsith::nn::{load_checkpoint, save_checkpoint, DeepSithNet, NetConfig};
use deepsith::sith::{sith_forward, Signal};
use deepsith::tasks::{gen_adding, gen_hateful8, gen_mackey_glass, sample_rng, MackeyGlassParams};
use deepsith::Error;
use ndarray::Array3;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    KernelTooLong = 4,
    Unsupported = 5,
    Diverged = 6,
    Io = 7,
    Config = 8,
    Checkpoint = 9,
    Data = 10,
    Panic = 11,
}

/// A fixed SITH filter bank.
pub struct DsFilterBank {
    bank: Arc<FilterBank>,
}

/// A DeepSITH network.
pub struct DsNet {
    net: DeepSithNet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> DsStatus {
    match err {
        Error::InvalidArgument(_) => DsStatus::InvalidArgument,
        Error::ShapeMismatch { .. } => DsStatus::ShapeMismatch,
        Error::KernelTooLong { .. } => DsStatus::KernelTooLong,
        Error::UnsupportedK { .. } => DsStatus::Unsupported,
        Error::Diverged(_) => DsStatus::Diverged,
        Error::StaleTrace(_) => DsStatus::InvalidArgument,
        Error::Idx { .. } | Error::Download(_) | Error::Csv(_) => DsStatus::Data,
        Error::Checkpoint(_) | Error::Json(_) => DsStatus::Checkpoint,
        Error::Config(_) => DsStatus::Config,
        Error::Io(_) => DsStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (DsStatus, String)>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsStatus::Panic
        }
    }
}

fn lib(err: Error) -> (DsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (DsStatus, String) {
    (DsStatus::NullPointer, format!("{what} is null"))
}

fn shape(what: &str, want: usize, got: usize) -> (DsStatus, String) {
    (
        DsStatus::ShapeMismatch,
        format!("{what}: need {want} elements, got {got}"),
    )
}

unsafe fn out_slice<'a>(
    ptr: *mut f64,
    len: usize,
    want: usize,
    what: &str,
) -> Result<&'a mut [f64], (DsStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(shape(what, want, len));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn in_slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (DsStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> Result<(), (DsStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    *ptr = value;
    Ok(())
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, (DsStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (DsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out[0..count]` with the geometric grid from `tau_min` to `tau_max`.
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_geometric_taus(
    tau_min: f64,
    tau_max: f64,
    count: usize,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let grid = geometric_taus(tau_min, tau_max, count).map_err(lib)?;
        out_slice(out, out_len, count, "out")?.copy_from_slice(grid.values());
        Ok(())
    })
}

/// Sharpness chosen by the k scan for the given grid.
///
/// # Safety
/// `k_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_select_k(
    tau_min: f64,
    tau_max: f64,
    n_taus: usize,
    k_max: u32,
    k_out: *mut u32,
) -> DsStatus {
    guard(|| {
        let grid = geometric_taus(tau_min, tau_max, n_taus).map_err(lib)?;
        let report = select_k(&grid, k_max).map_err(lib)?;
        write_out(k_out, report.chosen_k, "k_out")
    })
}

/// Builds a filter bank with unit time step and default truncation.
///
/// # Safety
/// `bank_out` must be writable; the handle is released with
/// [`ds_filterbank_free`].
#[no_mangle]
pub unsafe extern "C" fn ds_filterbank_new(
    tau_min: f64,
    tau_max: f64,
    n_taus: usize,
    k: u32,
    bank_out: *mut *mut DsFilterBank,
) -> DsStatus {
    guard(|| {
        if bank_out.is_null() {
            return Err(null("bank_out"));
        }
        let grid = geometric_taus(tau_min, tau_max, n_taus).map_err(lib)?;
        let bank = build_kernels(FilterSpec::new(grid, k)).map_err(lib)?;
        *bank_out = Box::into_raw(Box::new(DsFilterBank { bank: Arc::new(bank) }));
        Ok(())
    })
}

/// # Safety
/// `bank` must come from [`ds_filterbank_new`] and not be used afterwards.
/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn ds_filterbank_free(bank: *mut DsFilterBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Number of filters; 0 for a null handle.
///
/// # Safety
/// `bank` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ds_filterbank_num_taus(bank: *const DsFilterBank) -> usize {
    bank.as_ref().map_or(0, |b| b.bank.num_taus())
}

/// Taps in filter `index`.
///
/// # Safety
/// `bank` must be live and `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_filterbank_kernel_len(
    bank: *const DsFilterBank,
    index: usize,
    len_out: *mut usize,
) -> DsStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        if index >= b.bank.num_taus() {
            return Err((DsStatus::InvalidArgument, format!("filter {index} out of range")));
        }
        write_out(len_out, b.bank.kernel(index).len(), "len_out")
    })
}

/// Copies the taps of filter `index`.
///
/// # Safety
/// `bank` must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_filterbank_kernel(
    bank: *const DsFilterBank,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        if index >= b.bank.num_taus() {
            return Err((DsStatus::InvalidArgument, format!("filter {index} out of range")));
        }
        let k = b.bank.kernel(index);
        out_slice(out, out_len, k.len(), "out")?.copy_from_slice(k);
        Ok(())
    })
}

/// Convolves a `steps x features` series with the bank. `out` receives
/// `steps x features x n_taus` values.
///
/// # Safety
/// `input` must hold `steps * features` doubles and `out` `out_len`.
#[no_mangle]
pub unsafe extern "C" fn ds_sith_forward(
    bank: *const DsFilterBank,
    input: *const f64,
    steps: usize,
    features: usize,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let b = bank.as_ref().ok_or_else(|| null("bank"))?;
        let x = in_slice(input, steps * features, "input")?;
        let signal = Signal::from_vec(steps, features, x.to_vec()).map_err(lib)?;
        let act = sith_forward(&signal, &b.bank);
        let data = act.data.as_standard_layout();
        let dst = out_slice(out, out_len, data.len(), "out")?;
        dst.copy_from_slice(data.as_slice().expect("standard layout"));
        Ok(())
    })
}

fn boxed_net(net: DeepSithNet, net_out: *mut *mut DsNet) -> Result<(), (DsStatus, String)> {
    if net_out.is_null() {
        return Err(null("net_out"));
    }
    unsafe { *net_out = Box::into_raw(Box::new(DsNet { net })) };
    Ok(())
}

/// Freshly initialized network from a built-in preset (`adding`,
/// `mackey-glass`, `hateful8`, `smnist`, `psmnist`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `net_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_net_from_preset(name: *const c_char, seed: u64, net_out: *mut *mut DsNet) -> DsStatus {
    guard(|| {
        let config = presets::by_name(str_arg(name, "name")?).map_err(lib)?;
        let net_config = config.net_config().map_err(lib)?;
        let net = DeepSithNet::new(net_config, &mut sample_rng(seed, 0)).map_err(lib)?;
        boxed_net(net, net_out)
    })
}

/// Freshly initialized network from a JSON network configuration (the
/// `config` object of a checkpoint).
///
/// # Safety
/// `json` must be a NUL-terminated string and `net_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_net_from_json(json: *const c_char, seed: u64, net_out: *mut *mut DsNet) -> DsStatus {
    guard(|| {
        let config: NetConfig =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| (DsStatus::Config, e.to_string()))?;
        let net = DeepSithNet::new(config, &mut sample_rng(seed, 0)).map_err(lib)?;
        boxed_net(net, net_out)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `net_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_net_load(path: *const c_char, net_out: *mut *mut DsNet) -> DsStatus {
    guard(|| {
        let net = load_checkpoint(Path::new(str_arg(path, "path")?)).map_err(lib)?;
        boxed_net(net, net_out)
    })
}

/// # Safety
/// `net` must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ds_net_save(net: *const DsNet, path: *const c_char) -> DsStatus {
    guard(|| {
        let n = net.as_ref().ok_or_else(|| null("net"))?;
        save_checkpoint(&n.net, Path::new(str_arg(path, "path")?)).map_err(lib)
    })
}

/// # Safety
/// `net` must come from a `ds_net_*` constructor and not be used afterwards.
/// Null is accepted.
#[no_mangle]
pub unsafe extern "C" fn ds_net_free(net: *mut DsNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Learnable scalars; 0 for a null handle.
///
/// # Safety
/// `net` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ds_net_parameter_count(net: *const DsNet) -> usize {
    net.as_ref().map_or(0, |n| n.net.parameter_count())
}

/// Outputs per row; 0 for a null handle.
///
/// # Safety
/// `net` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ds_net_output_dim(net: *const DsNet) -> usize {
    net.as_ref().map_or(0, |n| n.net.config().output_dim)
}

/// Rows that [`ds_net_forward`] produces for a batch: `batch` for a
/// final-step readout, `batch * steps` for every-step.
///
/// # Safety
/// `net` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ds_net_output_rows(net: *const DsNet, batch: usize, steps: usize) -> usize {
    net.as_ref().map_or(0, |n| match n.net.config().readout {
        deepsith::nn::ReadoutMode::FinalStep => batch,
        deepsith::nn::ReadoutMode::EveryStep => batch * steps,
    })
}

/// Inference on a `batch x steps x features` input; `out` receives
/// `rows x output_dim` values (see [`ds_net_output_rows`]).
///
/// # Safety
/// `input` must hold `batch * steps * features` doubles and `out` `out_len`.
#[no_mangle]
pub unsafe extern "C" fn ds_net_forward(
    net: *const DsNet,
    input: *const f64,
    batch: usize,
    steps: usize,
    features: usize,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let n = net.as_ref().ok_or_else(|| null("net"))?;
        let x = in_slice(input, batch * steps * features, "input")?;
        let x = Array3::from_shape_vec((batch, steps, features), x.to_vec())
            .map_err(|e| (DsStatus::ShapeMismatch, e.to_string()))?;
        let y = n.net.forward_eval(&x).map_err(lib)?;
        let dst = out_slice(out, out_len, y.len(), "out")?;
        dst.copy_from_slice(y.as_slice().expect("fresh array"));
        Ok(())
    })
}

/// One adding-problem sample: `input_out` gets `length x 2` values.
///
/// # Safety
/// `input_out` must hold `input_len` doubles; `target_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_gen_adding(
    length: usize,
    seed: u64,
    input_out: *mut f64,
    input_len: usize,
    target_out: *mut f64,
) -> DsStatus {
    guard(|| {
        let s = gen_adding(length, seed).map_err(lib)?;
        let dst = out_slice(input_out, input_len, length * 2, "input_out")?;
        for (d, v) in dst.iter_mut().zip(s.input.data().iter()) {
            *d = *v;
        }
        write_out(target_out, s.target, "target_out")
    })
}

/// One Hateful-8 series of `17 + noise_len` steps.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_gen_hateful8(
    noise_len: usize,
    class: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let s = gen_hateful8(noise_len, class, seed).map_err(lib)?;
        out_slice(out, out_len, s.input.len(), "out")?.copy_from_slice(&s.input);
        Ok(())
    })
}

/// A Mackey-Glass series with the default parameters.
///
/// # Safety
/// `out` must hold `length` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_gen_mackey_glass(
    tau: usize,
    length: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> DsStatus {
    guard(|| {
        let s = gen_mackey_glass(tau, length, seed, &MackeyGlassParams::default()).map_err(lib)?;
        out_slice(out, out_len, s.values.len(), "out")?.copy_from_slice(&s.values);
        Ok(())
    })
}
