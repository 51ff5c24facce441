//! C ABI over the `wavesys` library.
//!
//! Every entry point returns a [`WsStatus`]; results come back through out
//! pointers. Handles are opaque and released with their `*_free` function.
//! After a non-OK status, [`ws_last_error`] describes the failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wavesys::asymptotics::{classify_values, verify_wave_conditions, Case, Classification, ClassifyConfig, ConditionReport};
use wavesys::cli::{builtins, spec::parse_spec, spec::ProblemSpec};
use wavesys::genfunc::Rescaling;
use wavesys::linalg::{self, SymMatrix};
use wavesys::solver::{equivalence_check, solve_system, solve_wave, GridSolution};
use wavesys::transform::{wave_to_system, WaveProblem};
use wavesys::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    /// A verification ran and its aggregate verdict is negative.
    Verdict = 1,
    Blowup = 2,
    Input = 3,
    Numerical = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsMollifier {
    Model = 0,
    Log = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsCase {
    A = 0,
    B = 1,
    C = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsSolver {
    System = 0,
    Wave = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsClassKind {
    Negligible = 0,
    Bounded = 1,
    LogType = 2,
    Moderate = 3,
    Divergent = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsClassification {
    pub kind: WsClassKind,
    /// `N` for a moderate class, otherwise 0.
    pub order: u32,
    /// Fitted power exponent; NaN when no fit was made.
    pub exponent: f64,
    /// Fitted log coefficient; NaN when no fit was made.
    pub log_coefficient: f64,
}

/// A parsed spec and the problem built from it.
pub struct WsProblem {
    spec: ProblemSpec,
    problem: WaveProblem,
}

pub struct WsReport {
    report: ConditionReport,
    json: CString,
}

pub struct WsSolution {
    solution: GridSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> WsStatus {
    match e.root() {
        Error::BlowUp { .. } => WsStatus::Blowup,
        Error::NonFinite
        | Error::NotSpd { .. }
        | Error::NotSpdAt { .. }
        | Error::Singular { .. }
        | Error::NotLorentzian { .. }
        | Error::Structure(_)
        | Error::Norm(_)
        | Error::Fit(_) => WsStatus::Numerical,
        _ => WsStatus::Input,
    }
}

fn guard(f: impl FnOnce() -> Result<WsStatus, Fail>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            WsStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            WsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(p)
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    let p = non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::Config(format!("{what} is not UTF-8"))))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

fn rescaling(m: WsMollifier) -> Rescaling {
    match m {
        WsMollifier::Model => Rescaling::Model,
        WsMollifier::Log => Rescaling::Log,
    }
}

fn boxed_problem(spec: ProblemSpec) -> Result<*mut WsProblem, Fail> {
    let problem = spec.problem(None)?;
    Ok(Box::into_raw(Box::new(WsProblem { spec, problem })))
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn ws_status_name(status: WsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        WsStatus::Ok => c"ok",
        WsStatus::Verdict => c"verdict failure",
        WsStatus::Blowup => c"numerical blow-up",
        WsStatus::Input => c"input error",
        WsStatus::Numerical => c"numerical error",
        WsStatus::NullPointer => c"null pointer",
        WsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Parses a spec document and builds its problem.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_problem_from_spec(text: *const c_char, out: *mut *mut WsProblem) -> WsStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let handle = boxed_problem(parse_spec(text)?)?;
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))?;
        Ok(WsStatus::Ok)
    })
}

/// Builds one of the named example problems.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_problem_from_builtin(name: *const c_char, out: *mut *mut WsProblem) -> WsStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let text = builtins::text(name).ok_or_else(|| Error::Config(format!("unknown built-in '{name}'")))?;
        let handle = boxed_problem(parse_spec(text)?)?;
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))?;
        Ok(WsStatus::Ok)
    })
}

/// # Safety
/// `p` must be null or a handle from `ws_problem_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_problem_free(p: *mut WsProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Rebuilds the problem with one mollifier for every coefficient.
///
/// # Safety
/// `p` must be a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn ws_problem_set_mollifier(p: *mut WsProblem, mollifier: WsMollifier) -> WsStatus {
    guard(|| {
        let p = &mut *(non_null(p, "problem")? as *mut WsProblem);
        p.problem = p.spec.problem(Some(rescaling(mollifier)))?;
        Ok(WsStatus::Ok)
    })
}

/// # Safety
/// `p` must be a live problem handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_problem_dim(p: *const WsProblem, out: *mut usize) -> WsStatus {
    guard(|| {
        let p = &*non_null(p, "problem")?;
        write_out(out, p.problem.dim(), "out")?;
        Ok(WsStatus::Ok)
    })
}

/// Checks the hypotheses of `case` on the wave form. Returns `Ok` or
/// `Verdict`; the report is written in both cases.
///
/// # Safety
/// `p` must be a live problem handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_verify(p: *const WsProblem, case: WsCase, out: *mut *mut WsReport) -> WsStatus {
    guard(|| {
        let p = &*non_null(p, "problem")?;
        non_null(out, "out")?;
        let case = match case {
            WsCase::A => Case::A,
            WsCase::B => Case::B,
            WsCase::C => Case::C,
        };
        let report = verify_wave_conditions(&p.problem, case, &p.spec.sweep)?;
        let json = serde_json::to_string(&report).map_err(|e| Error::Spec(e.to_string()))?;
        let pass = report.aggregate;
        let handle = Box::new(WsReport {
            report,
            json: CString::new(json).map_err(|e| Error::Spec(e.to_string()))?,
        });
        out.write(Box::into_raw(handle));
        Ok(if pass { WsStatus::Ok } else { WsStatus::Verdict })
    })
}

/// # Safety
/// `r` must be a live report handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_report_counts(r: *const WsReport, hypotheses: *mut usize, failures: *mut usize) -> WsStatus {
    guard(|| {
        let r = &*non_null(r, "report")?;
        write_out(hypotheses, r.report.hypotheses.len(), "hypotheses")?;
        write_out(failures, r.report.failures().len(), "failures")?;
        Ok(WsStatus::Ok)
    })
}

/// Whether every hypothesis on `net` passes.
///
/// # Safety
/// `r` must be a live report handle, `net` NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_report_net_passes(r: *const WsReport, net: *const c_char, out: *mut bool) -> WsStatus {
    guard(|| {
        let r = &*non_null(r, "report")?;
        let net = c_str(net, "net")?;
        if r.report.for_net(net).next().is_none() {
            return Err(Error::Config(format!("no hypothesis on net '{net}'")).into());
        }
        write_out(out, r.report.for_net(net).all(|h| h.pass), "out")?;
        Ok(WsStatus::Ok)
    })
}

/// The full report as JSON, owned by the handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ws_report_json(r: *const WsReport) -> *const c_char {
    if r.is_null() {
        return ptr::null();
    }
    (*r).json.as_ptr()
}

/// # Safety
/// `r` must be null or a report handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_report_free(r: *mut WsReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Solves at one ε with the spec's grid.
///
/// # Safety
/// `p` must be a live problem handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_solve(p: *const WsProblem, eps: f64, solver: WsSolver, out: *mut *mut WsSolution) -> WsStatus {
    guard(|| {
        let p = &*non_null(p, "problem")?;
        non_null(out, "out")?;
        let solution = match solver {
            WsSolver::System => solve_system(&wave_to_system(&p.problem)?, eps, &p.spec.grid)?,
            WsSolver::Wave => solve_wave(&p.problem, eps, &p.spec.grid)?,
        };
        out.write(Box::into_raw(Box::new(WsSolution { solution })));
        Ok(WsStatus::Ok)
    })
}

/// Node count, components per node and final time.
///
/// # Safety
/// `s` must be a live solution handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_solution_shape(s: *const WsSolution, nodes: *mut usize, components: *mut usize, final_time: *mut f64) -> WsStatus {
    guard(|| {
        let s = &(*non_null(s, "solution")?).solution;
        write_out(nodes, s.grid.num_nodes(), "nodes")?;
        write_out(components, s.ncomp, "components")?;
        write_out(final_time, s.final_time(), "final_time")?;
        Ok(WsStatus::Ok)
    })
}

/// Copies one component at the final time into `buf` of length `len`,
/// which must equal the node count.
///
/// # Safety
/// `s` must be a live solution handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ws_solution_component(s: *const WsSolution, component: usize, buf: *mut f64, len: usize) -> WsStatus {
    guard(|| {
        let s = &(*non_null(s, "solution")?).solution;
        non_null(buf, "buf")?;
        if component >= s.ncomp {
            return Err(Error::Config(format!("component {component} out of range (ncomp {})", s.ncomp)).into());
        }
        let values = s.component(component);
        if len != values.len() {
            return Err(Error::Shape(format!("buffer holds {len} values, solution has {}", values.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&values);
        Ok(WsStatus::Ok)
    })
}

/// # Safety
/// `s` must be null or a solution handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_solution_free(s: *mut WsSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Observed orders of the system/wave discrepancy and of the relation
/// residual over the spec's grid steps.
///
/// # Safety
/// `p` must be a live problem handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_equivalence_orders(p: *const WsProblem, discrepancy_order: *mut f64, relation_order: *mut f64) -> WsStatus {
    guard(|| {
        let p = &*non_null(p, "problem")?;
        let eq = &p.spec.equivalence;
        let rep = equivalence_check(&p.problem, eq.eps, &p.spec.grid, &eq.h, None)?;
        write_out(discrepancy_order, rep.discrepancy_order, "discrepancy_order")?;
        write_out(relation_order, rep.relation_order, "relation_order")?;
        Ok(WsStatus::Ok)
    })
}

/// Classifies a sweep of `n` norm values with the default thresholds.
///
/// # Safety
/// `eps` and `values` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_classify(eps: *const f64, values: *const f64, n: usize, out: *mut WsClassification) -> WsStatus {
    guard(|| {
        let eps = std::slice::from_raw_parts(non_null(eps, "eps")?, n);
        let values = std::slice::from_raw_parts(non_null(values, "values")?, n);
        let (fit, class) = classify_values(eps, values, &ClassifyConfig::default())?;
        let (kind, order) = match class {
            Classification::Negligible => (WsClassKind::Negligible, 0),
            Classification::Bounded => (WsClassKind::Bounded, 0),
            Classification::LogType => (WsClassKind::LogType, 0),
            Classification::Moderate(n) => (WsClassKind::Moderate, n),
            Classification::Divergent => (WsClassKind::Divergent, 0),
        };
        let c = WsClassification {
            kind,
            order,
            exponent: fit.as_ref().map_or(f64::NAN, |f| f.p),
            log_coefficient: fit.as_ref().map_or(f64::NAN, |f| f.q),
        };
        write_out(out, c, "out")?;
        Ok(WsStatus::Ok)
    })
}

/// SPD square root of the row-major `n × n` matrix `r` into `s`.
///
/// # Safety
/// `r` must be valid for `n²` reads and `s` for `n²` writes.
#[no_mangle]
pub unsafe extern "C" fn ws_spd_sqrt(r: *const f64, n: usize, s: *mut f64) -> WsStatus {
    guard(|| {
        let r = std::slice::from_raw_parts(non_null(r, "r")?, n * n);
        non_null(s, "s")?;
        let m = linalg::Matrix::from_fn(n, n, |i, j| r[i * n + j]);
        let root = linalg::spd_sqrt(&SymMatrix::from_matrix(&m, 1e-12 * m.frobenius().max(1.0))?)?;
        std::slice::from_raw_parts_mut(s, n * n).copy_from_slice(root.as_matrix().as_slice());
        Ok(WsStatus::Ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> Option<String> {
        let p = ws_last_error();
        (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
    }

    #[test]
    fn errors_map_to_codes() {
        let blow = Error::BlowUp { step: 3, t: 0.1, max_abs: 1e9 }.at_eps(0.5);
        assert_eq!(status_of(&blow), WsStatus::Blowup);
        assert_eq!(status_of(&Error::NotSpd { min_eigenvalue: -1.0, floor: 0.0 }), WsStatus::Numerical);
        assert_eq!(status_of(&Error::Config("bad".into())), WsStatus::Input);
    }

    #[test]
    fn guard_records_and_clears_errors() {
        assert_eq!(guard(|| Err(Fail::Null("spec"))), WsStatus::NullPointer);
        assert_eq!(last_error().as_deref(), Some("null pointer: spec"));
        assert_eq!(guard(|| Ok(WsStatus::Ok)), WsStatus::Ok);
        assert_eq!(last_error(), None);
    }

    #[test]
    fn guard_catches_panics() {
        let hook = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let s = guard(|| panic!("boom"));
        std::panic::set_hook(hook);
        assert_eq!(s, WsStatus::Panic);
        assert_eq!(last_error().as_deref(), Some("internal panic"));
    }
}
