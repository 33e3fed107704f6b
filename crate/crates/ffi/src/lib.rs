//! C interface to the `qpjacobi` library.
//!
//! Every function returns a [`QpjStatus`]. On failure the message is available from
//! [`qpj_last_error`] until the next call on the same thread. Strings returned through
//! `char **` out-parameters are owned by the caller and released with [`qpj_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qpjacobi::scattering::{read_interchange, write_interchange, ScatteringData};
use qpjacobi::scenario::{self, Scenario, ScenarioConfig, Status};
use qpjacobi::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpjStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed JSON, interchange text or invalid configuration.
    InvalidInput = 2,
    /// A numerical step failed (quadrature, eigenvalue search, GLM solve, ...).
    Numerical = 3,
    /// Index out of range.
    OutOfRange = 4,
    /// The computation completed but an invariant or admissibility check failed.
    Warn = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

/// Scenario built from a JSON configuration.
pub struct QpjScenario(Scenario);

/// Scattering data on the circle grid.
pub struct QpjScatteringData(ScatteringData);

/// Scattering coefficients at one quadrature node.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QpjNode {
    pub band: usize,
    pub side: f64,
    pub lambda: f64,
    pub weight: f64,
    pub w_re: f64,
    pub w_im: f64,
    pub t_re: f64,
    pub t_im: f64,
    pub r_plus_re: f64,
    pub r_plus_im: f64,
    pub r_minus_re: f64,
    pub r_minus_im: f64,
}

/// Eigenvalue with its norming constants.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QpjBoundState {
    pub rho: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code(e: &Error) -> QpjStatus {
    match e {
        Error::Parse(_) | Error::Io(_) | Error::InvalidEdges(_) | Error::InvalidDirichletData(_) => QpjStatus::InvalidInput,
        Error::InvalidPerturbation(_) | Error::NonPositiveCoefficient(_) => QpjStatus::InvalidInput,
        Error::OutOfWindow(_) => QpjStatus::OutOfRange,
        _ => QpjStatus::Numerical,
    }
}

enum Fail {
    Status(QpjStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Status(code(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<QpjStatus, Fail>) -> QpjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => {
            if s == QpjStatus::Ok {
                set_error("");
            }
            s
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            QpjStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(QpjStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(QpjStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Ok(());
    }
    let c = CString::new(s).map_err(|_| Fail::Status(QpjStatus::Internal, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail::Status(QpjStatus::Internal, e.to_string()))
}

fn outcome(s: Status) -> QpjStatus {
    match s {
        Status::Pass => QpjStatus::Ok,
        Status::Warn => QpjStatus::Warn,
    }
}

unsafe fn config_or_default(config_json: *const c_char, data: &ScatteringData) -> Result<ScenarioConfig, Fail> {
    if config_json.is_null() {
        Ok(ScenarioConfig::for_data(data))
    } else {
        Ok(ScenarioConfig::from_json(str_arg(config_json, "config_json")?)?)
    }
}

/// Message describing the last failure on this thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn qpj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qpj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a scenario (curve, background, perturbation) from a JSON configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_scenario_new(config_json: *const c_char, out: *mut *mut QpjScenario) -> QpjStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::from_json(str_arg(config_json, "config_json")?)?;
        *out = Box::into_raw(Box::new(QpjScenario(Scenario::build(cfg)?)));
        Ok(QpjStatus::Ok)
    })
}

/// # Safety
/// `sc` must be null or a handle from [`qpj_scenario_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qpj_scenario_free(sc: *mut QpjScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Computes scattering data. Returns `Warn` if a forward identity exceeds its tolerance;
/// the data and report are produced in that case too. `report_json` may be null.
///
/// # Safety
/// `sc` must be a live scenario handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_forward(
    sc: *const QpjScenario,
    out: *mut *mut QpjScatteringData,
    report_json: *mut *mut c_char,
) -> QpjStatus {
    guard(|| {
        if sc.is_null() {
            return Err(null("scenario"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let (data, report) = scenario::forward(&(*sc).0)?;
        put_string(report_json, json(&report)?)?;
        *out = Box::into_raw(Box::new(QpjScatteringData(data)));
        Ok(outcome(report.status))
    })
}

/// Forward and inverse problem in one pass; the report is written to `report_json`.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn qpj_roundtrip(sc: *const QpjScenario, report_json: *mut *mut c_char) -> QpjStatus {
    guard(|| {
        if sc.is_null() {
            return Err(null("scenario"));
        }
        let report = scenario::roundtrip(&(*sc).0)?;
        put_string(report_json, json(&report)?)?;
        Ok(outcome(report.status))
    })
}

/// # Safety
/// `data` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_free(data: *mut QpjScatteringData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Parses the interchange text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_from_interchange(text: *const c_char, out: *mut *mut QpjScatteringData) -> QpjStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let data = read_interchange(str_arg(text, "text")?.as_bytes())?;
        *out = Box::into_raw(Box::new(QpjScatteringData(data)));
        Ok(QpjStatus::Ok)
    })
}

/// Serialises scattering data to the interchange text format.
///
/// # Safety
/// `data` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_to_interchange(data: *const QpjScatteringData, out: *mut *mut c_char) -> QpjStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let mut buf = Vec::new();
        write_interchange(&(*data).0, &mut buf)?;
        put_string(out, String::from_utf8(buf).map_err(|e| Fail::Status(QpjStatus::Internal, e.to_string()))?)?;
        Ok(QpjStatus::Ok)
    })
}

/// Number of quadrature nodes.
///
/// # Safety
/// `data` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_node_count(data: *const QpjScatteringData, count: *mut usize) -> QpjStatus {
    guard(|| {
        if data.is_null() || count.is_null() {
            return Err(null("argument"));
        }
        *count = (&(*data).0).nodes.len();
        Ok(QpjStatus::Ok)
    })
}

/// Coefficients at node `index`.
///
/// # Safety
/// `data` must be a live handle and `node` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_node(data: *const QpjScatteringData, index: usize, node: *mut QpjNode) -> QpjStatus {
    guard(|| {
        if data.is_null() || node.is_null() {
            return Err(null("argument"));
        }
        let Some(n) = (&(*data).0).nodes.get(index) else {
            return Err(Fail::Status(QpjStatus::OutOfRange, format!("node {index} out of range")));
        };
        *node = QpjNode {
            band: n.band,
            side: n.side,
            lambda: n.lambda,
            weight: n.weight,
            w_re: n.w.re,
            w_im: n.w.im,
            t_re: n.t.re,
            t_im: n.t.im,
            r_plus_re: n.r_plus.re,
            r_plus_im: n.r_plus.im,
            r_minus_re: n.r_minus.re,
            r_minus_im: n.r_minus.im,
        };
        Ok(QpjStatus::Ok)
    })
}

/// Number of eigenvalues below, between and above the bands.
///
/// # Safety
/// `data` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_bound_state_count(data: *const QpjScatteringData, count: *mut usize) -> QpjStatus {
    guard(|| {
        if data.is_null() || count.is_null() {
            return Err(null("argument"));
        }
        *count = (&(*data).0).bound_states.len();
        Ok(QpjStatus::Ok)
    })
}

/// Eigenvalue `index` in increasing order, with its norming constants.
///
/// # Safety
/// `data` must be a live handle and `state` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_data_bound_state(
    data: *const QpjScatteringData,
    index: usize,
    state: *mut QpjBoundState,
) -> QpjStatus {
    guard(|| {
        if data.is_null() || state.is_null() {
            return Err(null("argument"));
        }
        let Some(b) = (&(*data).0).bound_states.get(index) else {
            return Err(Fail::Status(QpjStatus::OutOfRange, format!("bound state {index} out of range")));
        };
        *state = QpjBoundState { rho: b.rho, gamma_plus: b.gamma_plus, gamma_minus: b.gamma_minus };
        Ok(QpjStatus::Ok)
    })
}

/// Runs the admissibility checks. Returns `Warn` if a condition fails.
/// `config_json` may be null to use default settings for the curve stored in `data`.
///
/// # Safety
/// `data` must be a live handle; string arguments NUL-terminated or null.
#[no_mangle]
pub unsafe extern "C" fn qpj_validate(
    data: *const QpjScatteringData,
    config_json: *const c_char,
    report_json: *mut *mut c_char,
) -> QpjStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let d = &(*data).0;
        let cfg = config_or_default(config_json, d)?;
        let report = scenario::validate_data(d, &cfg)?;
        put_string(report_json, json(&report)?)?;
        Ok(if report.passed() { QpjStatus::Ok } else { QpjStatus::Warn })
    })
}

/// Validates and reconstructs the coefficients on the configured index range.
/// `a` and `b`, if not null, must hold `n_hi - n_lo + 1` values and receive the
/// reconstructed coefficients; they are left untouched when validation fails.
///
/// # Safety
/// `data` must be a live handle; `a` and `b` null or large enough.
#[no_mangle]
pub unsafe extern "C" fn qpj_inverse(
    data: *const QpjScatteringData,
    config_json: *const c_char,
    a: *mut f64,
    b: *mut f64,
    len: usize,
    report_json: *mut *mut c_char,
) -> QpjStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let d = &(*data).0;
        let cfg = config_or_default(config_json, d)?;
        let report = scenario::inverse(d, &cfg)?;
        if let Some(rec) = &report.reconstruction {
            for (dst, src) in [(a, &rec.a), (b, &rec.b)] {
                if dst.is_null() {
                    continue;
                }
                if len < src.len() {
                    return Err(Fail::Status(QpjStatus::OutOfRange, format!("buffer holds {len} values, need {}", src.len())));
                }
                ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        put_string(report_json, json(&report)?)?;
        Ok(outcome(report.status))
    })
}

/// Surface diagnostics as JSON.
///
/// # Safety
/// `config_json` must be NUL-terminated and `report_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpj_surface_report(config_json: *const c_char, seed: u64, report_json: *mut *mut c_char) -> QpjStatus {
    guard(|| {
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        let cfg = ScenarioConfig::from_json(str_arg(config_json, "config_json")?)?;
        let out = scenario::surface_report(&cfg, seed, 16)?;
        put_string(report_json, json(&out)?)?;
        Ok(QpjStatus::Ok)
    })
}
