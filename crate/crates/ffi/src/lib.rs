//! C ABI over the hivqe engine.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `*_free`. Every call returns a `HivqeStatus`; on failure the message is
//! available from `hivqe_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hivqe::cli::result_json;
use hivqe::integrals::parse_fcidump;
use hivqe::oracle::{fci_ground, DEFAULT_FCI_LIMIT};
use hivqe::{driver, Error, IntegralSet, RunConfig, RunResult, RunStatus, Sector};

/// Status code returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HivqeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Config = 5,
    SectorTooLarge = 6,
    NotConverged = 7,
    NoValidSamples = 8,
    Internal = 9,
    Panic = 10,
}

/// Outcome of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HivqeRunStatus {
    Converged = 0,
    Stalled = 1,
    MaxIterations = 2,
}

/// Parsed one- and two-electron integrals.
pub struct HivqeIntegrals {
    inner: IntegralSet,
}

/// Result of `hivqe_run`.
pub struct HivqeRunResult {
    inner: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HivqeStatus {
    match e {
        Error::Header(_) | Error::Parse { .. } | Error::OddSpin { .. } | Error::Json(_) => HivqeStatus::Parse,
        Error::Io { .. } => HivqeStatus::Io,
        Error::Config(_) | Error::ElectronCount(_) | Error::IndexOutOfRange { .. } | Error::NotClosedShell { .. } => {
            HivqeStatus::Config
        }
        Error::SectorTooLarge { .. } | Error::OracleLimit { .. } | Error::SafetyCap { .. } => {
            HivqeStatus::SectorTooLarge
        }
        Error::NotConverged { .. } => HivqeStatus::NotConverged,
        Error::NoValidSamples { .. } => HivqeStatus::NoValidSamples,
        _ => HivqeStatus::Internal,
    }
}

enum Failure {
    Status(HivqeStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, records any error message, and converts panics to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HivqeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HivqeStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HivqeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(HivqeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(HivqeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(HivqeStatus::Internal, "string contains NUL".into()))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hivqe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hivqe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses FCIDUMP text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out_handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hivqe_integrals_parse(
    text: *const c_char,
    out_handle: *mut *mut HivqeIntegrals,
) -> HivqeStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let inner = parse_fcidump(str_arg(text, "text")?)?;
        *slot = Box::into_raw(Box::new(HivqeIntegrals { inner }));
        Ok(())
    })
}

/// Loads an FCIDUMP file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hivqe_integrals_load(
    path: *const c_char,
    out_handle: *mut *mut HivqeIntegrals,
) -> HivqeStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let inner = IntegralSet::from_path(str_arg(path, "path")?)?;
        *slot = Box::into_raw(Box::new(HivqeIntegrals { inner }));
        Ok(())
    })
}

/// Frees integrals. NULL is ignored.
///
/// # Safety
/// `h` must come from `hivqe_integrals_parse`/`_load` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hivqe_integrals_free(h: *mut HivqeIntegrals) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Orbital and electron counts.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_integrals_shape(
    h: *const HivqeIntegrals,
    n_orb: *mut usize,
    n_alpha: *mut usize,
    n_beta: *mut usize,
) -> HivqeStatus {
    guard(|| {
        let s = &handle(h, "integrals")?.inner;
        *out(n_orb, "n_orb")? = s.n_orb();
        *out(n_alpha, "n_alpha")? = s.n_alpha();
        *out(n_beta, "n_beta")? = s.n_beta();
        Ok(())
    })
}

/// Hartree-Fock energy including the core term.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_hartree_fock_energy(h: *const HivqeIntegrals, energy: *mut f64) -> HivqeStatus {
    guard(|| {
        let s = &handle(h, "integrals")?.inner;
        *out(energy, "energy")? = driver::hartree_fock_energy(s);
        Ok(())
    })
}

/// Exact ground-state energy over the full sector; fails with
/// `SECTOR_TOO_LARGE` above `limit` determinants (0 selects the default).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_fci_energy(h: *const HivqeIntegrals, limit: usize, energy: *mut f64) -> HivqeStatus {
    guard(|| {
        let s = &handle(h, "integrals")?.inner;
        let slot = out(energy, "energy")?;
        let limit = if limit == 0 { DEFAULT_FCI_LIMIT } else { limit };
        *slot = fci_ground(s, limit)?.energy;
        Ok(())
    })
}

/// Sector size as a decimal string (free with `hivqe_string_free`).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_sector_size(h: *const HivqeIntegrals, size: *mut *mut c_char) -> HivqeStatus {
    guard(|| {
        let s = &handle(h, "integrals")?.inner;
        let slot = out(size, "size")?;
        *slot = c_string(Sector::of(s).size().to_string())?;
        Ok(())
    })
}

/// Runs the full iteration. `config_json` is a flat JSON object of run
/// settings, or NULL for defaults.
///
/// # Safety
/// `h` must be valid, `config_json` NULL or NUL-terminated, `out_handle` valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_run(
    h: *const HivqeIntegrals,
    config_json: *const c_char,
    out_handle: *mut *mut HivqeRunResult,
) -> HivqeStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let s = &handle(h, "integrals")?.inner;
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        let inner = driver::run_hivqe(&cfg, s, None)?;
        *slot = Box::into_raw(Box::new(HivqeRunResult { inner }));
        Ok(())
    })
}

/// Frees a run result. NULL is ignored.
///
/// # Safety
/// `r` must come from `hivqe_run` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hivqe_result_free(r: *mut HivqeRunResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Lowest energy found (Hartree).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_result_energy(r: *const HivqeRunResult, energy: *mut f64) -> HivqeStatus {
    guard(|| {
        *out(energy, "energy")? = handle(r, "result")?.inner.energy;
        Ok(())
    })
}

/// Number of determinants in the final subspace.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_result_n_dets(r: *const HivqeRunResult, n_dets: *mut usize) -> HivqeStatus {
    guard(|| {
        *out(n_dets, "n_dets")? = handle(r, "result")?.inner.n_dets();
        Ok(())
    })
}

/// How the run terminated.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_result_status(r: *const HivqeRunResult, status: *mut HivqeRunStatus) -> HivqeStatus {
    guard(|| {
        *out(status, "status")? = match handle(r, "result")?.inner.status {
            RunStatus::Converged => HivqeRunStatus::Converged,
            RunStatus::Stalled => HivqeRunStatus::Stalled,
            RunStatus::MaxIterations => HivqeRunStatus::MaxIterations,
        };
        Ok(())
    })
}

/// The result document as JSON (free with `hivqe_string_free`).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hivqe_result_to_json(r: *const HivqeRunResult, json: *mut *mut c_char) -> HivqeStatus {
    guard(|| {
        let r = &handle(r, "result")?.inner;
        let slot = out(json, "json")?;
        *slot = c_string(result_json(r).to_string())?;
        Ok(())
    })
}
