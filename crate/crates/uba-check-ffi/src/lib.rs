#![allow(non_camel_case_types)]

//! C ABI for the model checker: opaque handles, status codes, and a
//! thread-local last-error message. All functions are
//! panic-safe at the boundary.
//!
//! Ownership rules: `*_parse_*` outputs are owned by the caller and
//! released with the matching `*_free`; strings returned by
//! [`uba_last_error_message`] are released with [`uba_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uba_check::automata::{parse_hoa, verify_unambiguous, Nba};
use uba_check::engine::{self, Method, Options};
use uba_check::markov::{parse_dtmc, Dtmc};
use uba_check::Error;

/// Status of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum uba_status {
    /// Success.
    UBA_OK = 0,
    /// A required pointer was null or an argument was invalid.
    UBA_ERR_INVALID_ARGUMENT = 1,
    /// The automaton admits two accepting runs over some word.
    UBA_ERR_AMBIGUOUS = 2,
    /// Input text could not be parsed.
    UBA_ERR_PARSE = 3,
    /// Numerical procedure or precondition failure.
    UBA_ERR_NUMERIC = 4,
}

/// Opaque Büchi automaton handle.
pub struct uba_automaton {
    inner: Nba,
}

/// Opaque Markov chain handle.
pub struct uba_dtmc {
    inner: Dtmc,
}

/// Engine configuration; obtain defaults from [`uba_options_default`].
#[repr(C)]
#[derive(Clone, Copy)]
pub struct uba_options {
    /// 0 = power iteration, 1 = rank-based.
    pub method: i32,
    /// Convergence threshold (default 1e-10).
    pub epsilon: f64,
    /// Iteration budget before the rank fallback (default 1000000).
    pub max_iter: u64,
    /// Pivot tolerance of rank computations (default 1e-9).
    pub rank_tol: f64,
    /// Nonzero skips the ambiguity check.
    pub trust_unambiguous: i32,
    /// Worker threads for independent SCCs (default 1).
    pub workers: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> uba_status {
    match err {
        Error::Ambiguous { .. } => uba_status::UBA_ERR_AMBIGUOUS,
        Error::HoaSyntax { .. }
        | Error::UnsupportedAcceptance(_)
        | Error::UnsupportedHoaFeature(_)
        | Error::Dtmc { .. }
        | Error::AlphabetMismatch(_)
        | Error::Io(_) => uba_status::UBA_ERR_PARSE,
        Error::Config(_) => uba_status::UBA_ERR_INVALID_ARGUMENT,
        Error::Numeric(_) | Error::Precondition(_) => uba_status::UBA_ERR_NUMERIC,
    }
}

fn guard<F: FnOnce() -> uba_status>(f: F) -> uba_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            uba_status::UBA_ERR_NUMERIC
        }
    }
}

unsafe fn read_utf8<'a>(ptr: *const c_char) -> Result<&'a str, uba_status> {
    if ptr.is_null() {
        set_error("null text pointer".into());
        return Err(uba_status::UBA_ERR_INVALID_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("text is not valid UTF-8".into());
        uba_status::UBA_ERR_PARSE
    })
}

fn options_from(opts: *const uba_options) -> Options {
    if opts.is_null() {
        return Options::default();
    }
    let o = unsafe { &*opts };
    Options {
        method: if o.method == 1 { Method::Rank } else { Method::Power },
        epsilon: o.epsilon,
        max_iter: o.max_iter as usize,
        rank_tol: o.rank_tol,
        trust_unambiguous: o.trust_unambiguous != 0,
        workers: o.workers.max(1) as usize,
    }
}

/// Library version string; static, do not free.
#[no_mangle]
pub extern "C" fn uba_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Default engine options.
#[no_mangle]
pub extern "C" fn uba_options_default() -> uba_options {
    let d = Options::default();
    uba_options {
        method: 0,
        epsilon: d.epsilon,
        max_iter: d.max_iter as u64,
        rank_tol: d.rank_tol,
        trust_unambiguous: 0,
        workers: 1,
    }
}

/// Message of the most recent error on this thread, or null. The
/// caller owns the returned string (release with [`uba_string_free`]).
#[no_mangle]
pub extern "C" fn uba_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string obtained from this library.
///
/// # Safety
/// `s` must come from [`uba_last_error_message`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uba_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a HOA v1 document (state-based Büchi acceptance).
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn uba_automaton_parse_hoa(
    text: *const c_char,
    out: *mut *mut uba_automaton,
) -> uba_status {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return uba_status::UBA_ERR_INVALID_ARGUMENT;
        }
        let text = match read_utf8(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_hoa(text) {
            Ok(nba) => {
                *out = Box::into_raw(Box::new(uba_automaton { inner: nba }));
                uba_status::UBA_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Releases an automaton handle.
///
/// # Safety
/// `a` must come from [`uba_automaton_parse_hoa`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uba_automaton_free(a: *mut uba_automaton) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Number of automaton states; 0 for a null handle.
#[no_mangle]
pub extern "C" fn uba_automaton_num_states(a: *const uba_automaton) -> usize {
    if a.is_null() {
        return 0;
    }
    unsafe { &*a }.inner.num_states()
}

/// Parses the textual DTMC format.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` non-null.
#[no_mangle]
pub unsafe extern "C" fn uba_dtmc_parse(
    text: *const c_char,
    out: *mut *mut uba_dtmc,
) -> uba_status {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return uba_status::UBA_ERR_INVALID_ARGUMENT;
        }
        let text = match read_utf8(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_dtmc(text) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(uba_dtmc { inner: d }));
                uba_status::UBA_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Releases a chain handle.
///
/// # Safety
/// `d` must come from [`uba_dtmc_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uba_dtmc_free(d: *mut uba_dtmc) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

unsafe fn run_measure(
    a: *const uba_automaton,
    d: *const uba_dtmc,
    opts: *const uba_options,
    out: *mut f64,
    uniform: bool,
) -> uba_status {
    if a.is_null() || out.is_null() || (!uniform && d.is_null()) {
        set_error("null handle".into());
        return uba_status::UBA_ERR_INVALID_ARGUMENT;
    }
    let nba = &(*a).inner;
    let options = options_from(opts);
    let result = if uniform {
        engine::measure_uniform(nba, &options)
    } else {
        engine::measure(&(*d).inner, nba, &options)
    };
    match result {
        Ok(r) => {
            *out = r.probability;
            uba_status::UBA_OK
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Probability that the chain satisfies the automaton.
///
/// # Safety
/// `a`, `d`, `out` must be valid; `opts` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn uba_measure(
    a: *const uba_automaton,
    d: *const uba_dtmc,
    opts: *const uba_options,
    out: *mut f64,
) -> uba_status {
    guard(|| run_measure(a, d, opts, out, false))
}

/// Probability of the automaton's language under the uniform measure.
///
/// # Safety
/// `a`, `out` must be valid; `opts` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn uba_measure_uniform(
    a: *const uba_automaton,
    opts: *const uba_options,
    out: *mut f64,
) -> uba_status {
    guard(|| run_measure(a, ptr::null(), opts, out, true))
}

/// Does the automaton accept almost all infinite words?
///
/// # Safety
/// `a`, `out` must be valid; `opts` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn uba_almost_universal(
    a: *const uba_automaton,
    opts: *const uba_options,
    out: *mut bool,
) -> uba_status {
    guard(|| {
        if a.is_null() || out.is_null() {
            set_error("null handle".into());
            return uba_status::UBA_ERR_INVALID_ARGUMENT;
        }
        match engine::almost_universal(&(*a).inner, &options_from(opts)) {
            Ok(v) => {
                *out = v;
                uba_status::UBA_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Checks that every word has at most one accepting run.
///
/// # Safety
/// `a`, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uba_verify_unambiguous(
    a: *const uba_automaton,
    out: *mut bool,
) -> uba_status {
    guard(|| {
        if a.is_null() || out.is_null() {
            set_error("null handle".into());
            return uba_status::UBA_ERR_INVALID_ARGUMENT;
        }
        let report = verify_unambiguous(&(*a).inner);
        if let Some(w) = &report.witness {
            set_error(format!(
                "ambiguous: word {}({})^ω has two accepting runs",
                w.prefix_display(),
                w.cycle_display()
            ));
        }
        *out = report.unambiguous;
        uba_status::UBA_OK
    })
}

/// Exact powerset-absorption probability for strongly connected
/// automata (ground-truth oracle).
///
/// # Safety
/// `a`, `d`, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uba_oracle(
    a: *const uba_automaton,
    d: *const uba_dtmc,
    out: *mut f64,
) -> uba_status {
    guard(|| {
        if a.is_null() || d.is_null() || out.is_null() {
            set_error("null handle".into());
            return uba_status::UBA_ERR_INVALID_ARGUMENT;
        }
        match engine::powerset_absorption_oracle(&(*a).inner, &(*d).inner) {
            Ok(r) => {
                *out = r.value;
                uba_status::UBA_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_automaton(text: &str) -> *mut uba_automaton {
        let c = CString::new(text).unwrap();
        let mut out = ptr::null_mut();
        let status = unsafe { uba_automaton_parse_hoa(c.as_ptr(), &mut out) };
        assert!(status == uba_status::UBA_OK);
        out
    }

    const FIG1_RIGHT: &str = r#"HOA: v1
States: 2
Start: 0
Start: 1
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
[!0] 0
[!0] 1
State: 1 {0}
[0] 0
[0] 1
--END--
"#;

    #[test]
    fn measure_uniform_through_the_c_abi() {
        let a = parse_automaton(FIG1_RIGHT);
        let mut p = 0.0f64;
        let status = unsafe { uba_measure_uniform(a, ptr::null(), &mut p) };
        assert!(status == uba_status::UBA_OK);
        assert!((p - 1.0).abs() <= 1e-9);

        let mut unamb = false;
        let status = unsafe { uba_verify_unambiguous(a, &mut unamb) };
        assert!(status == uba_status::UBA_OK && unamb);

        assert_eq!(uba_automaton_num_states(a), 2);
        unsafe { uba_automaton_free(a) };
    }

    #[test]
    fn measure_against_parsed_chain() {
        let a = parse_automaton(FIG1_RIGHT);
        let chain = CString::new(
            "dtmc 2 1\nap p\ninit 0 1/2\ninit 1 1/2\nlabel 0 -\nlabel 1 p\n\
             trans 0 0 1/2\ntrans 0 1 1/2\ntrans 1 0 1/2\ntrans 1 1 1/2\n",
        )
        .unwrap();
        let mut d = ptr::null_mut();
        assert!(unsafe { uba_dtmc_parse(chain.as_ptr(), &mut d) } == uba_status::UBA_OK);

        let mut p = 0.0f64;
        assert!(unsafe { uba_measure(a, d, ptr::null(), &mut p) } == uba_status::UBA_OK);
        assert!((p - 1.0).abs() <= 1e-9);

        let mut o = 0.0f64;
        assert!(unsafe { uba_oracle(a, d, &mut o) } == uba_status::UBA_OK);
        assert!((o - 1.0).abs() <= 1e-12);

        unsafe {
            uba_dtmc_free(d);
            uba_automaton_free(a);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        // parse error
        let bad = CString::new("not hoa").unwrap();
        let mut out = ptr::null_mut();
        let status = unsafe { uba_automaton_parse_hoa(bad.as_ptr(), &mut out) };
        assert!(status == uba_status::UBA_ERR_PARSE);
        let msg = uba_last_error_message();
        assert!(!msg.is_null());
        unsafe { uba_string_free(msg) };

        // ambiguous automaton
        let amb = r#"HOA: v1
States: 2
Start: 0
Start: 1
AP: 1 "p"
Acceptance: 1 Inf(0)
--BODY--
State: 0 {0}
[t] 0
State: 1 {0}
[t] 1
--END--
"#;
        let a = parse_automaton(amb);
        let mut p = 0.0f64;
        let status = unsafe { uba_measure_uniform(a, ptr::null(), &mut p) };
        assert!(status == uba_status::UBA_ERR_AMBIGUOUS);
        unsafe { uba_automaton_free(a) };

        // null pointers
        let status = unsafe { uba_measure_uniform(ptr::null(), ptr::null(), &mut p) };
        assert!(status == uba_status::UBA_ERR_INVALID_ARGUMENT);
    }
}
