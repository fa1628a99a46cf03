//! C ABI over `cvpuf`.
//!
//! Keys and databases are opaque heap handles released with their `_free`
//! function. Every fallible call returns a [`CvpufStatus`]; on failure the
//! message is available from [`cvpuf_last_error`] on the same thread.
//! Strings returned by the library are released with [`cvpuf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvpuf::homodyne::{p_in_theoretical, HomodyneChannel, ProbeSet};
use cvpuf::protocol::{e_threshold, enroll_exact, m_threshold, radii, verify, VerificationConfig};
use cvpuf::rng::{purpose, Streams};
use cvpuf::scattering::{enhancement, generate_key, optimal_mask, uniform_coupling};
use cvpuf::{CrpDatabase, Error, ScatteringKey};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvpufStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Json = 3,
    Io = 4,
    DegenerateKey = 5,
    ModeMismatch = 6,
    EmptyDatabase = 7,
    Utf8 = 8,
    Panic = 9,
}

/// Opaque scattering key.
pub struct CvpufKey(ScatteringKey);

/// Opaque challenge-response database.
pub struct CvpufDatabase(CrpDatabase);

/// Result of one verification run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvpufReport {
    pub sessions: u64,
    pub hits: u64,
    pub p_in: f64,
    pub p_in_expected: f64,
    pub epsilon: f64,
    pub enrollment_error: f64,
    pub accepted: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Status(CvpufStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> CvpufStatus {
    match e {
        Error::Parameter(_) | Error::Shape { .. } => CvpufStatus::InvalidArgument,
        Error::DegenerateKey => CvpufStatus::DegenerateKey,
        Error::EmptyDatabase => CvpufStatus::EmptyDatabase,
        Error::ModeMismatch { .. } => CvpufStatus::ModeMismatch,
        Error::Io(_) | Error::Csv(_) => CvpufStatus::Io,
        Error::Json(_) => CvpufStatus::Json,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CvpufStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvpufStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CvpufStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(CvpufStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail::Status(CvpufStatus::Utf8, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Fail::Status(CvpufStatus::InvalidArgument, e.to_string()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn cvpuf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Draws a key with `mode_count` modes from `seed`. Same key as `cvpuf enroll --seed`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_generate(
    mode_count: usize,
    l_over_l: f64,
    seed: u64,
    out: *mut *mut CvpufKey,
) -> CvpufStatus {
    guard(|| {
        let key = generate_key(mode_count, l_over_l, &mut Streams::new(seed).rng(purpose::TRUE_KEY, 0))?;
        write_out(out, Box::into_raw(Box::new(CvpufKey(key))), "out")
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_from_json(json: *const c_char, out: *mut *mut CvpufKey) -> CvpufStatus {
    guard(|| {
        let key: ScatteringKey = serde_json::from_str(read_str(json, "json")?).map_err(Error::from)?;
        write_out(out, Box::into_raw(Box::new(CvpufKey(key))), "out")
    })
}

/// # Safety
/// `key` must be a live handle; `out` a valid pointer. Free the result with [`cvpuf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_to_json(key: *const CvpufKey, out: *mut *mut c_char) -> CvpufStatus {
    guard(|| {
        let key = deref(key, "key")?;
        let s = serde_json::to_string(&key.0).map_err(Error::from)?;
        write_out(out, to_c_string(s)?, "out")
    })
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `key` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_mode_count(key: *const CvpufKey) -> usize {
    key.as_ref().map_or(0, |k| k.0.mode_count())
}

/// Enhancement of the optimal mask under uniform coupling with loss `tau`.
///
/// # Safety
/// `key` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_optimal_enhancement(
    key: *const CvpufKey,
    tau: f64,
    mean_challenge_photons: f64,
    out: *mut f64,
) -> CvpufStatus {
    guard(|| {
        let key = &deref(key, "key")?.0;
        let coupling = uniform_coupling(key.mode_count(), tau)?;
        let mask = optimal_mask(key, &coupling)?;
        write_out(out, enhancement(key, &coupling, &mask, mean_challenge_photons)?, "out")
    })
}

/// # Safety
/// `key` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_key_free(key: *mut CvpufKey) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Exact enrollment under uniform coupling with loss `tau`.
///
/// # Safety
/// `key` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_enroll_exact(
    key: *const CvpufKey,
    tau: f64,
    probe_states: usize,
    mean_probe_photons: f64,
    efficiency: f64,
    delta_over_sigma: f64,
    out: *mut *mut CvpufDatabase,
) -> CvpufStatus {
    guard(|| {
        let key = &deref(key, "key")?.0;
        let coupling = uniform_coupling(key.mode_count(), tau)?;
        let probes = ProbeSet::new(probe_states, mean_probe_photons)?;
        let channel = HomodyneChannel::with_bin_ratio(efficiency, delta_over_sigma)?;
        let db = enroll_exact(key, &coupling, &probes, &channel)?;
        write_out(out, Box::into_raw(Box::new(CvpufDatabase(db))), "out")
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_database_from_json(json: *const c_char, out: *mut *mut CvpufDatabase) -> CvpufStatus {
    guard(|| {
        let db: CrpDatabase = serde_json::from_str(read_str(json, "json")?).map_err(Error::from)?;
        write_out(out, Box::into_raw(Box::new(CvpufDatabase(db))), "out")
    })
}

/// # Safety
/// `db` must be a live handle; `out` a valid pointer. Free the result with [`cvpuf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cvpuf_database_to_json(db: *const CvpufDatabase, out: *mut *mut c_char) -> CvpufStatus {
    guard(|| {
        let db = deref(db, "database")?;
        let s = serde_json::to_string(&db.0).map_err(Error::from)?;
        write_out(out, to_c_string(s)?, "out")
    })
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_database_mode_count(db: *const CvpufDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.0.mode_count())
}

/// # Safety
/// `db` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_database_free(db: *mut CvpufDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Verifies `key` against `db` with `sessions` sessions. Same draws as `cvpuf verify --seed`.
///
/// # Safety
/// `key` and `db` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_verify(
    key: *const CvpufKey,
    db: *const CvpufDatabase,
    sessions: u64,
    epsilon: f64,
    zeta: f64,
    seed: u64,
    out: *mut CvpufReport,
) -> CvpufStatus {
    guard(|| {
        let key = &deref(key, "key")?.0;
        let db = &deref(db, "database")?.0;
        let coupling = uniform_coupling(db.mode_count(), db.setup_loss())?;
        let config = VerificationConfig::new(sessions, epsilon, zeta)?;
        let r = verify(key, db, &coupling, &config, &mut Streams::new(seed).rng(purpose::VERIFY, 0))?;
        let report = CvpufReport {
            sessions: r.sessions,
            hits: r.hits,
            p_in: r.p_in,
            p_in_expected: r.p_in_expected,
            epsilon: r.epsilon,
            enrollment_error: r.enrollment_error,
            accepted: r.accepted,
        };
        write_out(out, report, "out")
    })
}

/// Theoretical in-bin probability for detection efficiency and bin width.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_p_in(efficiency: f64, bin_width: f64, out: *mut f64) -> CvpufStatus {
    guard(|| write_out(out, p_in_theoretical(&HomodyneChannel::new(efficiency, bin_width)?), "out"))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_m_threshold(epsilon: f64, zeta: f64, out: *mut u64) -> CvpufStatus {
    guard(|| write_out(out, m_threshold(epsilon, zeta)?, "out"))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_e_threshold(
    mean_challenge_photons: f64,
    mode_count: usize,
    l_over_l: f64,
    out: *mut f64,
) -> CvpufStatus {
    guard(|| write_out(out, e_threshold(mean_challenge_photons, mode_count, l_over_l)?, "out"))
}

/// # Safety
/// `rho_f` and `rho_t` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cvpuf_radii(
    mean_challenge_photons: f64,
    variance: f64,
    enhancement: f64,
    rho_f: *mut f64,
    rho_t: *mut f64,
) -> CvpufStatus {
    guard(|| {
        if !(mean_challenge_photons > 0.0 && variance > 0.0 && enhancement > 0.0) {
            return Err(Fail::Status(CvpufStatus::InvalidArgument, "radii need positive arguments".into()));
        }
        let (f, t) = radii(mean_challenge_photons, variance, enhancement);
        write_out(rho_f, f, "rho_f")?;
        write_out(rho_t, t, "rho_t")
    })
}
