//! C ABI over the pcuq core: opaque handles, integer status codes, and a
//! thread-local last-error message.
//!
//! Conventions:
//! - Every fallible function returns a `PCUQ_*` status code; `PCUQ_OK` is 0.
//! - Output parameters are written only on success.
//! - Handles are created by `*_new`/`*_load` and released by the matching
//!   `*_free`; passing a handle to any other library is undefined behavior.
//! - `pcuq_last_error_message` retrieves the message of the most recent
//!   failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pcuq::analysis;
use pcuq::basis::{PcBasis, PolyFamily};
use pcuq::projection::{project, EvaluationTable, PcSurrogate};
use pcuq::quadrature::QuadratureRule;
use pcuq::sensitivity::sobol_indices;

/// Success.
pub const PCUQ_OK: i32 = 0;
/// A pointer argument was null.
pub const PCUQ_ERR_NULL: i32 = 1;
/// An argument failed validation (dimensions, ranges, family codes).
pub const PCUQ_ERR_INVALID: i32 = 2;
/// A numeric precondition failed (non-finite data, zero variance, ...).
pub const PCUQ_ERR_NUMERIC: i32 = 3;
/// File or serialization failure.
pub const PCUQ_ERR_IO: i32 = 4;
/// Invalid UTF-8 in a string argument.
pub const PCUQ_ERR_UTF8: i32 = 5;
/// The library panicked; state is unchanged but the call did nothing.
pub const PCUQ_ERR_PANIC: i32 = 6;

/// Hermite family code (standard normal germ).
pub const PCUQ_FAMILY_HERMITE: i32 = 0;
/// Legendre family code (uniform germ on [-1, 1]).
pub const PCUQ_FAMILY_LEGENDRE: i32 = 1;

/// Opaque multivariate polynomial basis.
pub struct PcuqBasis(PcBasis);
/// Opaque tensor quadrature rule.
pub struct PcuqRule(QuadratureRule);
/// Opaque PC surrogate.
pub struct PcuqSurrogate(PcSurrogate);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: Vec<u8> = message.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &pcuq::Error) -> i32 {
    use pcuq::Error::*;
    match err {
        Io(_) | Csv(_) | Json(_) | Archive(_) | Protocol(_) => PCUQ_ERR_IO,
        NonFiniteValue { .. }
        | NonPositiveOutput { .. }
        | ZeroDenominator { .. }
        | MomentsOfLogSurrogate
        | SensitivityOfLogSurrogate
        | DegenerateSample
        | NonBracketingInterval { .. } => PCUQ_ERR_NUMERIC,
        _ => PCUQ_ERR_INVALID,
    }
}

fn fail(err: pcuq::Error) -> i32 {
    let code = code_of(&err);
    set_error(&err.to_string());
    code
}

fn guard(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            PCUQ_ERR_PANIC
        }
    }
}

macro_rules! non_null {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer: ", stringify!($ptr)));
            return PCUQ_ERR_NULL;
        }
    };
}

fn families_from_codes(codes: &[i32]) -> Result<Vec<PolyFamily>, i32> {
    codes
        .iter()
        .map(|&c| match c {
            PCUQ_FAMILY_HERMITE => Ok(PolyFamily::HermiteProbabilist),
            PCUQ_FAMILY_LEGENDRE => Ok(PolyFamily::Legendre),
            other => {
                set_error(&format!("unknown family code {other}"));
                Err(PCUQ_ERR_INVALID)
            }
        })
        .collect()
}

/// Copy the last error message (nul-terminated) into `buffer`; returns the
/// full message length in bytes excluding the nul, regardless of truncation.
/// A zero-length buffer (or null) just queries the length.
#[no_mangle]
pub extern "C" fn pcuq_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            // SAFETY: caller supplies a writable buffer of `capacity` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), n);
                *buffer.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Build a total-degree basis of `order` over `dim` germ dimensions with the
/// given family codes.
///
/// # Safety
/// `families` must point to `dim` readable i32 values; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn pcuq_basis_new(
    dim: usize,
    order: usize,
    families: *const i32,
    out: *mut *mut PcuqBasis,
) -> i32 {
    guard(|| {
        non_null!(families);
        non_null!(out);
        let codes = unsafe { std::slice::from_raw_parts(families, dim) };
        let families = match families_from_codes(codes) {
            Ok(f) => f,
            Err(code) => return code,
        };
        match PcBasis::new(dim, order, families) {
            Ok(basis) => {
                unsafe { *out = Box::into_raw(Box::new(PcuqBasis(basis))) };
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a basis handle. Null is a no-op.
///
/// # Safety
/// `basis` must be null or a pointer obtained from `pcuq_basis_new`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn pcuq_basis_free(basis: *mut PcuqBasis) {
    if !basis.is_null() {
        drop(unsafe { Box::from_raw(basis) });
    }
}

/// Number of terms (P + 1) of the basis.
///
/// # Safety
/// `basis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_basis_term_count(basis: *const PcuqBasis, out: *mut usize) -> i32 {
    guard(|| {
        non_null!(basis);
        non_null!(out);
        unsafe { *out = (*basis).0.len() };
        PCUQ_OK
    })
}

/// Build a full-tensor Gauss rule with `points_per_dim[i]` nodes in
/// dimension i.
///
/// # Safety
/// `families` and `points_per_dim` must point to `dim` readable values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_rule_tensor(
    families: *const i32,
    points_per_dim: *const usize,
    dim: usize,
    out: *mut *mut PcuqRule,
) -> i32 {
    guard(|| {
        non_null!(families);
        non_null!(points_per_dim);
        non_null!(out);
        let codes = unsafe { std::slice::from_raw_parts(families, dim) };
        let families = match families_from_codes(codes) {
            Ok(f) => f,
            Err(code) => return code,
        };
        let points = unsafe { std::slice::from_raw_parts(points_per_dim, dim) };
        match QuadratureRule::tensor(&families, points) {
            Ok(rule) => {
                unsafe { *out = Box::into_raw(Box::new(PcuqRule(rule))) };
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a rule handle. Null is a no-op.
///
/// # Safety
/// `rule` must be null or a live handle from `pcuq_rule_tensor`.
#[no_mangle]
pub unsafe extern "C" fn pcuq_rule_free(rule: *mut PcuqRule) {
    if !rule.is_null() {
        drop(unsafe { Box::from_raw(rule) });
    }
}

/// Total node count of the rule.
///
/// # Safety
/// `rule` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_rule_node_count(rule: *const PcuqRule, out: *mut usize) -> i32 {
    guard(|| {
        non_null!(rule);
        non_null!(out);
        unsafe { *out = (*rule).0.len() };
        PCUQ_OK
    })
}

/// Copy node coordinates (row-major node_count x dim) and weights into the
/// caller's buffers. Either pointer may be null to skip that copy.
///
/// # Safety
/// Non-null `nodes` must hold node_count*dim doubles; non-null `weights`
/// must hold node_count doubles.
#[no_mangle]
pub unsafe extern "C" fn pcuq_rule_copy(
    rule: *const PcuqRule,
    nodes: *mut f64,
    weights: *mut f64,
) -> i32 {
    guard(|| {
        non_null!(rule);
        let r = unsafe { &(*rule).0 };
        if !nodes.is_null() {
            let dst = unsafe { std::slice::from_raw_parts_mut(nodes, r.len() * r.dim()) };
            for j in 0..r.len() {
                dst[j * r.dim()..(j + 1) * r.dim()].copy_from_slice(r.node(j));
            }
        }
        if !weights.is_null() {
            let dst = unsafe { std::slice::from_raw_parts_mut(weights, r.len()) };
            dst.copy_from_slice(r.weights());
        }
        PCUQ_OK
    })
}

/// Project model outputs evaluated at the rule's nodes (row-major
/// node_count x n_outputs) onto the basis. `log_transform` nonzero projects
/// ln(y) and evaluates as exp of the expansion.
///
/// # Safety
/// `outputs` must hold node_count*n_outputs doubles; handles must be live;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_project(
    rule: *const PcuqRule,
    basis: *const PcuqBasis,
    outputs: *const f64,
    n_outputs: usize,
    log_transform: i32,
    out: *mut *mut PcuqSurrogate,
) -> i32 {
    guard(|| {
        non_null!(rule);
        non_null!(basis);
        non_null!(outputs);
        non_null!(out);
        if n_outputs == 0 {
            set_error("n_outputs must be at least 1");
            return PCUQ_ERR_INVALID;
        }
        let rule = unsafe { &(*rule).0 };
        let basis = unsafe { &(*basis).0 };
        let data =
            unsafe { std::slice::from_raw_parts(outputs, rule.len() * n_outputs) }.to_vec();
        let labels = (0..n_outputs).map(|i| i.to_string()).collect();
        let table = match EvaluationTable::new(rule, data, labels) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        match project(&table, rule, basis, log_transform != 0) {
            Ok(projection) => {
                unsafe { *out = Box::into_raw(Box::new(PcuqSurrogate(projection.surrogate))) };
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a surrogate handle. Null is a no-op.
///
/// # Safety
/// `surrogate` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_free(surrogate: *mut PcuqSurrogate) {
    if !surrogate.is_null() {
        drop(unsafe { Box::from_raw(surrogate) });
    }
}

/// Number of output columns of the surrogate.
///
/// # Safety
/// `surrogate` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_n_outputs(
    surrogate: *const PcuqSurrogate,
    out: *mut usize,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        non_null!(out);
        unsafe { *out = (*surrogate).0.n_outputs() };
        PCUQ_OK
    })
}

/// Evaluate all outputs at a canonical point of length `dim`.
///
/// # Safety
/// `point` must hold `dim` doubles; `out` must hold n_outputs doubles.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_eval(
    surrogate: *const PcuqSurrogate,
    point: *const f64,
    dim: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        non_null!(point);
        non_null!(out);
        let s = unsafe { &(*surrogate).0 };
        let point = unsafe { std::slice::from_raw_parts(point, dim) };
        match s.eval(point) {
            Ok(values) => {
                let dst = unsafe { std::slice::from_raw_parts_mut(out, s.n_outputs()) };
                dst.copy_from_slice(&values);
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Coefficient-based mean and variance per output. Fails with
/// `PCUQ_ERR_NUMERIC` on log-transformed surrogates.
///
/// # Safety
/// `mean` and `variance` must each hold n_outputs doubles.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_moments(
    surrogate: *const PcuqSurrogate,
    mean: *mut f64,
    variance: *mut f64,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        non_null!(mean);
        non_null!(variance);
        let s = unsafe { &(*surrogate).0 };
        match s.moments() {
            Ok(moments) => {
                let mean = unsafe { std::slice::from_raw_parts_mut(mean, s.n_outputs()) };
                let variance =
                    unsafe { std::slice::from_raw_parts_mut(variance, s.n_outputs()) };
                for (i, m) in moments.iter().enumerate() {
                    mean[i] = m.mean;
                    variance[i] = m.variance;
                }
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// First-order, total, and mixed sensitivity indices of one output column.
/// `first` and `total` receive `dim` values; `mixed` receives one. Any of
/// the three may be null to skip it. Fails with `PCUQ_ERR_NUMERIC` when the
/// output has zero variance.
///
/// # Safety
/// Non-null buffers must have the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_sobol(
    surrogate: *const PcuqSurrogate,
    output: usize,
    first: *mut f64,
    total: *mut f64,
    mixed: *mut f64,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        let s = unsafe { &(*surrogate).0 };
        if output >= s.n_outputs() {
            set_error(&format!(
                "output {output} out of range for {} outputs",
                s.n_outputs()
            ));
            return PCUQ_ERR_INVALID;
        }
        let report = match sobol_indices(s) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        if !report.defined[output] {
            set_error(&format!("output {output} has zero variance; indices undefined"));
            return PCUQ_ERR_NUMERIC;
        }
        let d = s.basis().dim();
        if !first.is_null() {
            let dst = unsafe { std::slice::from_raw_parts_mut(first, d) };
            for i in 0..d {
                dst[i] = report.first_index(i, output);
            }
        }
        if !total.is_null() {
            let dst = unsafe { std::slice::from_raw_parts_mut(total, d) };
            for i in 0..d {
                dst[i] = report.total_index(i, output);
            }
        }
        if !mixed.is_null() {
            unsafe { *mixed = report.mixed[output] };
        }
        PCUQ_OK
    })
}

/// Exceedance probability P(output > threshold) and its standard error per
/// output column, from `n` seeded canonical draws.
///
/// # Safety
/// `probability` and `stderr_out` must each hold n_outputs doubles (either
/// may be null to skip).
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_exceedance(
    surrogate: *const PcuqSurrogate,
    threshold: f64,
    n: usize,
    seed: u64,
    probability: *mut f64,
    stderr_out: *mut f64,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        let s = unsafe { &(*surrogate).0 };
        match analysis::exceedance_probability(s, threshold, n, seed) {
            Ok(estimates) => {
                if !probability.is_null() {
                    let dst =
                        unsafe { std::slice::from_raw_parts_mut(probability, s.n_outputs()) };
                    for (d, e) in dst.iter_mut().zip(&estimates) {
                        *d = e.probability;
                    }
                }
                if !stderr_out.is_null() {
                    let dst =
                        unsafe { std::slice::from_raw_parts_mut(stderr_out, s.n_outputs()) };
                    for (d, e) in dst.iter_mut().zip(&estimates) {
                        *d = e.stderr;
                    }
                }
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Save the surrogate as an expansion archive (JSON) at `path`.
///
/// # Safety
/// `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_save(
    surrogate: *const PcuqSurrogate,
    path: *const c_char,
) -> i32 {
    guard(|| {
        non_null!(surrogate);
        non_null!(path);
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(_) => {
                set_error("path is not valid UTF-8");
                return PCUQ_ERR_UTF8;
            }
        };
        match unsafe { &(*surrogate).0 }.write_archive(std::path::Path::new(path)) {
            Ok(()) => PCUQ_OK,
            Err(e) => fail(e),
        }
    })
}

/// Load an expansion archive written by `pcuq_surrogate_save` (or the CLI).
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcuq_surrogate_load(
    path: *const c_char,
    out: *mut *mut PcuqSurrogate,
) -> i32 {
    guard(|| {
        non_null!(path);
        non_null!(out);
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(_) => {
                set_error("path is not valid UTF-8");
                return PCUQ_ERR_UTF8;
            }
        };
        match PcSurrogate::read_archive(std::path::Path::new(path)) {
            Ok(s) => {
                unsafe { *out = Box::into_raw(Box::new(PcuqSurrogate(s))) };
                PCUQ_OK
            }
            Err(e) => fail(e),
        }
    })
}
