//! C ABI for `pqeig`.
//!
//! Domains and solve results are opaque handles created by `pq_*` functions
//! and released with the matching `*_free`. Every function returns a
//! [`PqStatus`]; on failure, [`pq_last_error_message`] describes the error
//! on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pqeig::limit::{lambda_inf_ball, lambda_inf_rectangle, oracle_report, LimitSpec};
use pqeig::{solve_first_eigenpair, EigenResult, Error, Exponents, GridDomain, SolverOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PqStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Stagnation = 3,
    Numerical = 4,
    Panic = 5,
}

/// Opaque discretized domain.
pub struct PqDomain(GridDomain);

/// Opaque solve result.
pub struct PqEigenResult {
    result: EigenResult,
    nx: usize,
    ny: usize,
}

/// Solver settings. Obtain defaults from `pq_solver_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PqSolverOptions {
    pub max_iter: u64,
    pub tol_grad: f64,
    pub tol_constraint: f64,
    pub step0: f64,
    pub backtrack_factor: f64,
    pub seed: u64,
    pub memory: u64,
}

/// Closed form and oracle value for a rectangle.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PqOracleReport {
    pub formula_value: f64,
    pub oracle_value: f64,
    pub apex_value: f64,
    pub rel_gap: f64,
    /// 1 for the ball branch, 2 for the thin branch.
    pub branch: u8,
    pub agreement: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PqStatus {
    match e {
        Error::InvalidDomain(_)
        | Error::InvalidExponents(_)
        | Error::InvalidLimit(_)
        | Error::ShapeMismatch { .. }
        | Error::Unsupported(_)
        | Error::Config(_) => PqStatus::InvalidArgument,
        Error::Stagnation { .. } => PqStatus::Stagnation,
        Error::NonFinite(_)
        | Error::Scale { .. }
        | Error::Admissibility(_)
        | Error::FlatComponent(_)
        | Error::Io(_) => PqStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F: FnOnce() -> Result<(), (PqStatus, String)>>(f: F) -> PqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PqStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PqStatus, String) {
    (PqStatus::NullPointer, format!("{what} is null"))
}

/// Writes through an output pointer that was checked non-null.
unsafe fn put<T>(out: *mut T, v: T) -> Result<(), (PqStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length including the
/// NUL, or 0 when there is no error. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn pq_solver_options_default() -> PqSolverOptions {
    let d = SolverOptions::default();
    PqSolverOptions {
        max_iter: d.max_iter as u64,
        tol_grad: d.tol_grad,
        tol_constraint: d.tol_constraint,
        step0: d.step0,
        backtrack_factor: d.backtrack_factor,
        seed: d.seed,
        memory: d.memory as u64,
    }
}

/// Rectangle `(-r, r) x (-l, l)` with `nx * ny` nodes.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_domain_rectangle(
    r: f64,
    l: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut PqDomain,
) -> PqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = GridDomain::rectangle(r, l, nx, ny).map_err(lib_err)?;
        put(out, boxed(PqDomain(d)))
    })
}

/// Disk of radius `r` on an `n x n` grid, `n` odd.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_domain_disk(r: f64, n: usize, out: *mut *mut PqDomain) -> PqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = GridDomain::disk(r, n).map_err(lib_err)?;
        put(out, boxed(PqDomain(d)))
    })
}

/// Grid dimensions of a domain.
///
/// # Safety
/// `dom` must be null or a live handle; `nx`, `ny` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pq_domain_dims(dom: *const PqDomain, nx: *mut usize, ny: *mut usize) -> PqStatus {
    guard(|| {
        let d = dom.as_ref().ok_or_else(|| null("domain"))?;
        put(nx, d.0.nx())?;
        put(ny, d.0.ny())
    })
}

/// Releases a domain. Null is a no-op.
///
/// # Safety
/// `dom` must be null or a handle from `pq_domain_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pq_domain_free(dom: *mut PqDomain) {
    if !dom.is_null() {
        drop(Box::from_raw(dom));
    }
}

/// Solves for the first nontrivial eigenpair with `beta = q (1 - alpha/p)`.
/// `opts` may be null for defaults. A run that stops at `max_iter` still
/// returns a result with status `PQ_STATUS_STAGNATION`.
///
/// # Safety
/// `dom` must be a live handle, `opts` null or valid, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_solve(
    dom: *const PqDomain,
    p: f64,
    q: f64,
    alpha: f64,
    opts: *const PqSolverOptions,
    out: *mut *mut PqEigenResult,
) -> PqStatus {
    let mut stalled = false;
    let status = guard(|| {
        let d = dom.as_ref().ok_or_else(|| null("domain"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| pq_solver_options_default());
        let options = SolverOptions {
            max_iter: o.max_iter as usize,
            tol_grad: o.tol_grad,
            tol_constraint: o.tol_constraint,
            step0: o.step0,
            backtrack_factor: o.backtrack_factor,
            seed: o.seed,
            memory: o.memory as usize,
            warm_start: None,
        };
        let e = Exponents::with_derived_beta(p, q, alpha).map_err(lib_err)?;
        let result = solve_first_eigenpair(&d.0, &e, &options).map_err(lib_err)?;
        stalled = result.stop == pqeig::eigen::StopReason::MaxIterations;
        put(
            out,
            boxed(PqEigenResult {
                result,
                nx: d.0.nx(),
                ny: d.0.ny(),
            }),
        )
    });
    if status == PqStatus::Ok && stalled {
        set_error("solver stopped at max_iter before converging".into());
        return PqStatus::Stagnation;
    }
    status
}

/// # Safety
/// `res` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_result_lambda(res: *const PqEigenResult, out: *mut f64) -> PqStatus {
    guard(|| put(out, res.as_ref().ok_or_else(|| null("result"))?.result.lambda))
}

/// # Safety
/// `res` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_result_lambda_root_p(res: *const PqEigenResult, out: *mut f64) -> PqStatus {
    guard(|| put(out, res.as_ref().ok_or_else(|| null("result"))?.result.lambda_root_p))
}

/// # Safety
/// `res` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_result_iterations(res: *const PqEigenResult, out: *mut u64) -> PqStatus {
    guard(|| {
        put(
            out,
            res.as_ref().ok_or_else(|| null("result"))?.result.iterations as u64,
        )
    })
}

/// Copies `u` and `v` in row-major order (`x` index outer) into buffers of
/// `len = nx * ny` values each.
///
/// # Safety
/// `res` must be null or a live handle; `u`, `v` null or valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn pq_result_fields(res: *const PqEigenResult, u: *mut f64, v: *mut f64, len: usize) -> PqStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("result"))?;
        if u.is_null() || v.is_null() {
            return Err(null("field buffer"));
        }
        let n = r.nx * r.ny;
        if len != n {
            return Err((PqStatus::InvalidArgument, format!("buffer length {len}, expected {n}")));
        }
        for (src, dst) in [(&r.result.fields.u, u), (&r.result.fields.v, v)] {
            for (k, x) in src.iter().enumerate() {
                dst.add(k).write(*x);
            }
        }
        Ok(())
    })
}

/// Releases a result. Null is a no-op.
///
/// # Safety
/// `res` must be null or a handle from `pq_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pq_result_free(res: *mut PqEigenResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Limit value on the ball of radius `r`.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_lambda_inf_ball(gamma: f64, big_q: f64, r: f64, out: *mut f64) -> PqStatus {
    guard(|| {
        let s = LimitSpec::ball(gamma, big_q, r).map_err(lib_err)?;
        put(out, lambda_inf_ball(&s).map_err(lib_err)?)
    })
}

/// Two-branch limit value on `(-r, r) x (-l, l)`; `branch` may be null.
///
/// # Safety
/// `out` must be null or valid for a write; `branch` null or valid.
#[no_mangle]
pub unsafe extern "C" fn pq_lambda_inf_rectangle(
    gamma: f64,
    big_q: f64,
    r: f64,
    l: f64,
    out: *mut f64,
    branch: *mut u8,
) -> PqStatus {
    guard(|| {
        let s = LimitSpec::rectangle(gamma, big_q, r, l).map_err(lib_err)?;
        let v = lambda_inf_rectangle(&s).map_err(lib_err)?;
        put(out, v.value)?;
        if !branch.is_null() {
            branch.write(v.branch.number());
        }
        Ok(())
    })
}

/// Closed form against the brute-force cone/plane oracle with `samples`
/// points per scan (at least 1000).
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pq_oracle_rectangle(
    gamma: f64,
    big_q: f64,
    r: f64,
    l: f64,
    samples: usize,
    out: *mut PqOracleReport,
) -> PqStatus {
    guard(|| {
        if samples < 1000 {
            return Err((
                PqStatus::InvalidArgument,
                format!("need at least 1000 samples, got {samples}"),
            ));
        }
        let s = LimitSpec::rectangle(gamma, big_q, r, l).map_err(lib_err)?;
        let rep = oracle_report(&s, samples).map_err(lib_err)?;
        put(
            out,
            PqOracleReport {
                formula_value: rep.formula_value,
                oracle_value: rep.oracle_value,
                apex_value: rep.apex_value,
                rel_gap: rep.rel_gap,
                branch: rep.branch,
                agreement: rep.agreement,
            },
        )
    })
}
