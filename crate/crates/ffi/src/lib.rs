//! C interface to `regcalc`.
//!
//! Every fallible function returns an [`RcStatus`]; results go through out
//! pointers. On failure the thread-local last-error message is set and can
//! be read with [`rc_last_error_message`]. Strings returned by the library
//! are owned by the caller and released with [`rc_string_free`]; handles are
//! released with their own `*_free` function. Passing NULL to a `*_free`
//! function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use regcalc::cli::{self, Command, Overrides};
use regcalc::expr::{EvalError, Expr, MAX_DERIVATIVE_ORDER};
use regcalc::index_algebra::{DistributiveStructure, Index, IndexError, LawCheck, StructureSpec};

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStatus {
    RC_OK = 0,
    RC_NULL_POINTER = 1,
    RC_INVALID_UTF8 = 2,
    RC_PARSE_ERROR = 3,
    RC_EVAL_ERROR = 4,
    /// A partial index map has no value at the given pair.
    RC_UNDEFINED = 5,
    RC_INVALID_ARGUMENT = 6,
    RC_ORDER_BUDGET = 7,
    RC_PANIC = 8,
}

pub use RcStatus::*;

/// Opaque parsed expression.
pub struct RcExpr(Expr);

/// Opaque distributive index structure.
pub struct RcStructure(DistributiveStructure);

/// A rational index `num/den` with `den > 0`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RcIndex {
    pub num: i64,
    pub den: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RcStatus, String);

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> RcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RC_OK,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RC_PANIC
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(RC_NULL_POINTER, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(RC_INVALID_UTF8, format!("{what}: {e}")))
}

fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller promises `p` is either NULL or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(RC_NULL_POINTER, format!("{what} is NULL")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn index(i: RcIndex) -> Result<Index, Failure> {
    if i.den == 0 {
        return Err(Failure(RC_INVALID_ARGUMENT, "index denominator is zero".into()));
    }
    Ok(Index::new(i.num, i.den))
}

fn rc_index(i: Index) -> RcIndex {
    RcIndex {
        num: *i.numer(),
        den: *i.denom(),
    }
}

fn index_failure(e: IndexError) -> Failure {
    let status = match e {
        IndexError::UndefinedApplication { .. } => RC_UNDEFINED,
        _ => RC_INVALID_ARGUMENT,
    };
    Failure(status, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the last error message set on this thread, or NULL if the last
/// call succeeded. Free with [`rc_string_free`].
#[no_mangle]
pub extern "C" fn rc_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(m) => m.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs a `regcalc` command on TOML configuration text. `out_report`
/// receives the structured JSON report and `out_exit_code` the command's
/// exit code (0 pass, 1 fail, 2 inconclusive, 64 config, 65 precondition).
/// Returns `RC_OK` whenever a report was produced.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; out pointers must be
/// NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rc_run(
    command: *const c_char,
    config: *const c_char,
    out_exit_code: *mut i32,
    out_report: *mut *mut c_char,
) -> RcStatus {
    guard(|| {
        let name = text(command, "command")?;
        let config = text(config, "config")?;
        let exit_code = out(out_exit_code, "out_exit_code")?;
        let report_out = out(out_report, "out_report")?;
        let command = Command::from_name(name)
            .ok_or_else(|| Failure(RC_INVALID_ARGUMENT, format!("unknown command `{name}`")))?;
        let report = cli::run(command, config, &Overrides::default());
        *exit_code = report.exit_code;
        *report_out = owned_string(cli::render(&report, cli::Format::Structured));
        Ok(())
    })
}

/// Parses an expression. On success `*out` owns a new handle.
///
/// # Safety
/// `source` must be NULL or NUL-terminated; `out` must be NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rc_expr_parse(source: *const c_char, out_expr: *mut *mut RcExpr) -> RcStatus {
    guard(|| {
        let src = text(source, "source")?;
        let slot = out(out_expr, "out_expr")?;
        let e = Expr::parse(src).map_err(|e| Failure(RC_PARSE_ERROR, e.to_string()))?;
        *slot = Box::into_raw(Box::new(RcExpr(e)));
        Ok(())
    })
}

/// # Safety
/// `e` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_expr_free(e: *mut RcExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of coordinates the expression reads (highest variable index).
///
/// # Safety
/// `e` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_expr_arity(e: *const RcExpr, out_arity: *mut usize) -> RcStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| Failure(RC_NULL_POINTER, "expr is NULL".into()))?;
        *out(out_arity, "out_arity")? = e.0.arity();
        Ok(())
    })
}

/// Evaluates at `point[0..len]`. Domain violations return `RC_EVAL_ERROR`.
///
/// # Safety
/// `e` must be a live handle, `point` valid for `len` reads (or NULL when
/// `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn rc_expr_eval(
    e: *const RcExpr,
    point: *const f64,
    len: usize,
    out_value: *mut f64,
) -> RcStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| Failure(RC_NULL_POINTER, "expr is NULL".into()))?;
        let point: &[f64] = if len == 0 {
            &[]
        } else if point.is_null() {
            return Err(Failure(RC_NULL_POINTER, "point is NULL".into()));
        } else {
            std::slice::from_raw_parts(point, len)
        };
        let v = e.0.eval(point).map_err(|err: EvalError| Failure(RC_EVAL_ERROR, err.to_string()))?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// `order`-th partial derivative in coordinate `var` (1-based, `x1` is 1).
///
/// # Safety
/// `e` must be a live handle; `out_expr` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rc_expr_derivative(
    e: *const RcExpr,
    var: usize,
    order: u32,
    out_expr: *mut *mut RcExpr,
) -> RcStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| Failure(RC_NULL_POINTER, "expr is NULL".into()))?;
        let slot = out(out_expr, "out_expr")?;
        if var == 0 {
            return Err(Failure(RC_INVALID_ARGUMENT, "variables are numbered from 1".into()));
        }
        let d = e.0.differentiate(&[(var - 1, order)]).map_err(|_| {
            Failure(
                RC_ORDER_BUDGET,
                format!("derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}"),
            )
        })?;
        *slot = Box::into_raw(Box::new(RcExpr(d)));
        Ok(())
    })
}

/// Canonical printed form. Free with [`rc_string_free`].
///
/// # Safety
/// `e` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_expr_to_string(e: *const RcExpr) -> *mut c_char {
    match e.as_ref() {
        Some(e) => owned_string(e.0.to_string()),
        None => ptr::null_mut(),
    }
}

/// Builds a structure from its JSON form, e.g.
/// `{"structure": "holder_lp", "exponents": [1, 2, 3]}`.
///
/// # Safety
/// `spec` must be NULL or NUL-terminated; `out_structure` NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rc_structure_from_json(
    spec: *const c_char,
    out_structure: *mut *mut RcStructure,
) -> RcStatus {
    guard(|| {
        let src = text(spec, "spec")?;
        let slot = out(out_structure, "out_structure")?;
        let spec: StructureSpec =
            serde_json::from_str(src).map_err(|e| Failure(RC_PARSE_ERROR, e.to_string()))?;
        let s = spec.build().map_err(index_failure)?;
        *slot = Box::into_raw(Box::new(RcStructure(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_structure_free(s: *mut RcStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn binary(
    s: *const RcStructure,
    i: RcIndex,
    j: RcIndex,
    out_index: *mut RcIndex,
    delta: bool,
) -> RcStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| Failure(RC_NULL_POINTER, "structure is NULL".into()))?;
        let slot = out(out_index, "out_index")?;
        let (i, j) = (index(i)?, index(j)?);
        let v = if delta {
            s.0.delta_checked(&i, &j)
        } else {
            s.0.eps_checked(&i, &j)
        }
        .map_err(index_failure)?;
        *slot = rc_index(v);
        Ok(())
    })
}

/// Product index `ε(i, j)`; `RC_UNDEFINED` where the map has no value.
///
/// # Safety
/// `s` must be a live handle; `out_index` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rc_structure_eps(
    s: *const RcStructure,
    i: RcIndex,
    j: RcIndex,
    out_index: *mut RcIndex,
) -> RcStatus {
    binary(s, i, j, out_index, false)
}

/// Sum index `δ(i, j)`; `RC_UNDEFINED` where the map has no value.
///
/// # Safety
/// `s` must be a live handle; `out_index` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rc_structure_delta(
    s: *const RcStructure,
    i: RcIndex,
    j: RcIndex,
    out_index: *mut RcIndex,
) -> RcStatus {
    binary(s, i, j, out_index, true)
}

/// Exhaustively checks the distributivity laws and `δ(i,i) = i` on a
/// finite base. `out_violations` receives the number of violated law
/// instances plus idempotence failures; 0 means the structure passes.
///
/// # Safety
/// `s` must be a live handle; `out_violations` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rc_structure_check_laws(
    s: *const RcStructure,
    out_violations: *mut usize,
) -> RcStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| Failure(RC_NULL_POINTER, "structure is NULL".into()))?;
        let slot = out(out_violations, "out_violations")?;
        let r = s.0.check_laws(LawCheck::Exhaustive).map_err(index_failure)?;
        *slot = r.violations.len() + r.idempotence_failures.len();
        Ok(())
    })
}
