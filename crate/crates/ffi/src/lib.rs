//! C ABI for `phasegn`.
//!
//! Objects cross the boundary as opaque handles created by `pg_*_new`,
//! `pg_*_sample` or a solver and released with the matching `pg_*_free`.
//! Every fallible call returns a [`PgStatus`]; on failure
//! [`pg_last_error_message`] describes the error for the calling thread.
//! Panics never unwind into C; they surface as [`PgStatus::Panic`].
//!
//! Complex arrays are interleaved `re, im` pairs of `double`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phasegn::baselines::{altmin_solve, wf_solve, BaselineConfig};
use phasegn::init::{initialize, InitConfig, InitMethod};
use phasegn::measure::{observe, Observations, SensingEnsemble};
use phasegn::solver::{solve_gn, solve_gn_resampled, GnConfig};
use phasegn::{DenseMatrix, Error, Field, Signal, SolveStatus, SolveTrace, C64};

pub const PG_FIELD_REAL: u32 = 0;
pub const PG_FIELD_COMPLEX: u32 = 1;

pub const PG_INIT_EXP_SPECTRAL: u32 = 0;
pub const PG_INIT_SPECTRAL: u32 = 1;
pub const PG_INIT_TRUNCATED_SPECTRAL: u32 = 2;
pub const PG_INIT_NULL: u32 = 3;

pub const PG_SOLVER_GN: u32 = 0;
pub const PG_SOLVER_WF: u32 = 1;
pub const PG_SOLVER_ALTMIN: u32 = 2;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    FieldMismatch = 4,
    /// Singular systems, failed decompositions and degenerate data.
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgSolveStatus {
    Converged = 0,
    MaxIterations = 1,
    Completed = 2,
    StepFailed = 3,
    Diverged = 4,
}

/// Iteration cap and stopping tolerances; see `pg_solver_options_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgSolverOptions {
    pub max_iters: usize,
    /// Against `dist(x_k, z)/||z||` when the truth is passed.
    pub rel_err_tol: f64,
    /// Against `||F(x_k)||/||y||` otherwise.
    pub residual_tol: f64,
}

pub struct PgEnsemble(SensingEnsemble);
pub struct PgSignal(Signal);
pub struct PgObservations(Observations);
pub struct PgTrace(SolveTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PgStatus {
    match e {
        Error::DimensionMismatch { .. } => PgStatus::DimensionMismatch,
        Error::FieldMismatch(_) => PgStatus::FieldMismatch,
        Error::InvalidArgument(_) | Error::Config(_) => PgStatus::InvalidArgument,
        Error::Io(_) | Error::Serialization(_) => PgStatus::Io,
        _ => PgStatus::Numerical,
    }
}

struct Fail(PgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PgStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PgStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PgStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(data, len) })
}

unsafe fn slice_mut<'a>(data: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(data, len) })
}

fn field(code: u32) -> Result<Field, Fail> {
    match code {
        PG_FIELD_REAL => Ok(Field::Real),
        PG_FIELD_COMPLEX => Ok(Field::Complex),
        other => Err(invalid(format!("unknown field code {other}"))),
    }
}

fn field_code(f: Field) -> u32 {
    match f {
        Field::Real => PG_FIELD_REAL,
        Field::Complex => PG_FIELD_COMPLEX,
    }
}

fn stride(f: Field) -> usize {
    match f {
        Field::Real => 1,
        Field::Complex => 2,
    }
}

fn unpack(data: &[f64], f: Field) -> Vec<C64> {
    match f {
        Field::Real => data.iter().map(|&v| C64::new(v, 0.0)).collect(),
        Field::Complex => data.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
    }
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- sensing ensembles ----

/// Gaussian sensing vectors; deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn pg_ensemble_sample(
    m: usize,
    n: usize,
    field_code: u32,
    seed: u64,
    out: *mut *mut PgEnsemble,
) -> PgStatus {
    guard(|| unsafe { put(out, PgEnsemble(SensingEnsemble::sample(m, n, field(field_code)?, seed)?)) })
}

/// Sensing vectors `a_j` as rows of a row-major `m x n` array
/// (`m * n * 2` doubles when complex).
#[no_mangle]
pub unsafe extern "C" fn pg_ensemble_from_data(
    m: usize,
    n: usize,
    field_code: u32,
    data: *const f64,
    out: *mut *mut PgEnsemble,
) -> PgStatus {
    guard(|| unsafe {
        let f = field(field_code)?;
        let len = m.checked_mul(n).and_then(|v| v.checked_mul(stride(f))).ok_or_else(|| invalid("m * n overflows"))?;
        let values = unpack(slice(data, len, "data")?, f);
        let e = SensingEnsemble::from_vectors(DenseMatrix::from_row_major(m, n, values)?, f)?;
        put(out, PgEnsemble(e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pg_ensemble_m(e: *const PgEnsemble) -> usize {
    unsafe { e.as_ref() }.map_or(0, |e| e.0.m())
}

#[no_mangle]
pub unsafe extern "C" fn pg_ensemble_n(e: *const PgEnsemble) -> usize {
    unsafe { e.as_ref() }.map_or(0, |e| e.0.n())
}

#[no_mangle]
pub unsafe extern "C" fn pg_ensemble_free(e: *mut PgEnsemble) {
    unsafe { drop_handle(e) }
}

// ---- signals ----

/// `n` entries (`2 n` doubles when complex).
#[no_mangle]
pub unsafe extern "C" fn pg_signal_new(
    n: usize,
    field_code: u32,
    data: *const f64,
    out: *mut *mut PgSignal,
) -> PgStatus {
    guard(|| unsafe {
        let f = field(field_code)?;
        let values = unpack(slice(data, n * stride(f), "data")?, f);
        let s = match f {
            Field::Real => Signal::real(values.iter().map(|v| v.re).collect())?,
            Field::Complex => Signal::complex(values)?,
        };
        put(out, PgSignal(s))
    })
}

/// Standard Gaussian signal; deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn pg_signal_random(n: usize, field_code: u32, seed: u64, out: *mut *mut PgSignal) -> PgStatus {
    guard(|| unsafe { put(out, PgSignal(Signal::random(n, field(field_code)?, seed)?)) })
}

#[no_mangle]
pub unsafe extern "C" fn pg_signal_len(s: *const PgSignal) -> usize {
    unsafe { s.as_ref() }.map_or(0, |s| s.0.len())
}

/// `PG_FIELD_REAL` or `PG_FIELD_COMPLEX`; `UINT32_MAX` for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pg_signal_field(s: *const PgSignal) -> u32 {
    unsafe { s.as_ref() }.map_or(u32::MAX, |s| field_code(s.0.field()))
}

/// Copy the entries into `out`; `len` must be `n` (real) or `2 n` (complex).
#[no_mangle]
pub unsafe extern "C" fn pg_signal_copy(s: *const PgSignal, out: *mut f64, len: usize) -> PgStatus {
    guard(|| unsafe {
        let s = &get(s, "signal")?.0;
        let need = s.len() * stride(s.field());
        if len != need {
            return Err(Fail(PgStatus::DimensionMismatch, format!("buffer holds {len} doubles, signal needs {need}")));
        }
        let out = slice_mut(out, len, "out")?;
        match s.field() {
            Field::Real => out.copy_from_slice(&s.real_parts()),
            Field::Complex => {
                for (dst, v) in out.chunks_exact_mut(2).zip(s.entries()) {
                    dst[0] = v.re;
                    dst[1] = v.im;
                }
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pg_signal_free(s: *mut PgSignal) {
    unsafe { drop_handle(s) }
}

/// Phase-invariant distance `min_phi ||x - e^{i phi} z||`.
#[no_mangle]
pub unsafe extern "C" fn pg_dist(x: *const PgSignal, z: *const PgSignal, out: *mut f64) -> PgStatus {
    guard(|| unsafe {
        let d = phasegn::dist(&get(x, "x")?.0, &get(z, "z")?.0)?;
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

// ---- observations ----

/// `y_j = |a_j^H z|^2 + sigma * noise_j`; deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn pg_observe(
    e: *const PgEnsemble,
    z: *const PgSignal,
    sigma: f64,
    seed: u64,
    out: *mut *mut PgObservations,
) -> PgStatus {
    guard(|| unsafe { put(out, PgObservations(observe(&get(e, "ensemble")?.0, &get(z, "z")?.0, sigma, seed)?)) })
}

#[no_mangle]
pub unsafe extern "C" fn pg_observations_new(y: *const f64, m: usize, out: *mut *mut PgObservations) -> PgStatus {
    guard(|| unsafe { put(out, PgObservations(Observations::noiseless(slice(y, m, "y")?.to_vec()))) })
}

#[no_mangle]
pub unsafe extern "C" fn pg_observations_len(y: *const PgObservations) -> usize {
    unsafe { y.as_ref() }.map_or(0, |y| y.0.len())
}

/// Copy the intensities into `out`; `len` must equal the count.
#[no_mangle]
pub unsafe extern "C" fn pg_observations_copy(y: *const PgObservations, out: *mut f64, len: usize) -> PgStatus {
    guard(|| unsafe {
        let y = &get(y, "observations")?.0;
        if len != y.len() {
            return Err(Fail(PgStatus::DimensionMismatch, format!("buffer holds {len} doubles, need {}", y.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(&y.y);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pg_observations_free(y: *mut PgObservations) {
    unsafe { drop_handle(y) }
}

// ---- initialization and solvers ----

/// Spectral initializer; `method` is one of the `PG_INIT_*` codes and
/// `signal_field` the field of the returned start.
#[no_mangle]
pub unsafe extern "C" fn pg_initialize(
    e: *const PgEnsemble,
    y: *const PgObservations,
    method: u32,
    signal_field: u32,
    seed: u64,
    out: *mut *mut PgSignal,
) -> PgStatus {
    guard(|| unsafe {
        let method = match method {
            PG_INIT_EXP_SPECTRAL => InitMethod::ExpSpectral,
            PG_INIT_SPECTRAL => InitMethod::Spectral,
            PG_INIT_TRUNCATED_SPECTRAL => InitMethod::TruncatedSpectral,
            PG_INIT_NULL => InitMethod::Null,
            other => return Err(invalid(format!("unknown init method {other}"))),
        };
        let cfg = InitConfig { seed, ..InitConfig::new(method, field(signal_field)?) };
        let r = initialize(&get(e, "ensemble")?.0, &get(y, "observations")?.0, &cfg)?;
        put(out, PgSignal(r.x0))
    })
}

/// Defaults for a `PG_SOLVER_*` kind: 100 iterations for Gauss-Newton, 2500
/// for the baselines; tolerances `1e-5` and `1e-12`.
#[no_mangle]
pub extern "C" fn pg_solver_options_default(kind: u32) -> PgSolverOptions {
    let (max_iters, rel, res) = if kind == PG_SOLVER_GN {
        let d = GnConfig::default();
        (d.max_iters, d.rel_err_tol, d.residual_tol)
    } else {
        let d = BaselineConfig::default();
        (d.max_iters, d.rel_err_tol, d.residual_tol)
    };
    PgSolverOptions { max_iters, rel_err_tol: rel, residual_tol: res }
}

struct SolveArgs<'a> {
    e: &'a SensingEnsemble,
    y: &'a Observations,
    truth: Option<&'a Signal>,
    opts: PgSolverOptions,
}

unsafe fn solve_args<'a>(
    e: *const PgEnsemble,
    y: *const PgObservations,
    truth: *const PgSignal,
    opts: *const PgSolverOptions,
    kind: u32,
) -> Result<SolveArgs<'a>, Fail> {
    unsafe {
        Ok(SolveArgs {
            e: &get(e, "ensemble")?.0,
            y: &get(y, "observations")?.0,
            truth: truth.as_ref().map(|t| &t.0),
            opts: opts.as_ref().copied().unwrap_or_else(|| pg_solver_options_default(kind)),
        })
    }
}

fn gn_config(o: &PgSolverOptions) -> GnConfig {
    GnConfig { max_iters: o.max_iters, rel_err_tol: o.rel_err_tol, residual_tol: o.residual_tol, ..GnConfig::default() }
}

fn baseline_config(o: &PgSolverOptions) -> BaselineConfig {
    BaselineConfig {
        max_iters: o.max_iters,
        rel_err_tol: o.rel_err_tol,
        residual_tol: o.residual_tol,
        ..BaselineConfig::default()
    }
}

/// Gauss-Newton from `x0`. `truth` and `opts` may be null.
#[no_mangle]
pub unsafe extern "C" fn pg_solve_gn(
    e: *const PgEnsemble,
    y: *const PgObservations,
    x0: *const PgSignal,
    truth: *const PgSignal,
    opts: *const PgSolverOptions,
    out: *mut *mut PgTrace,
) -> PgStatus {
    guard(|| unsafe {
        let a = solve_args(e, y, truth, opts, PG_SOLVER_GN)?;
        put(out, PgTrace(solve_gn(a.e, a.y, &get(x0, "x0")?.0, a.truth, &gn_config(&a.opts))?))
    })
}

/// Re-sampled Gauss-Newton for real signals with target accuracy `epsilon`
/// in `(0, 1/2)`; initializes itself from the first data block.
#[no_mangle]
pub unsafe extern "C" fn pg_solve_gn_resampled(
    e: *const PgEnsemble,
    y: *const PgObservations,
    epsilon: f64,
    truth: *const PgSignal,
    opts: *const PgSolverOptions,
    out: *mut *mut PgTrace,
) -> PgStatus {
    guard(|| unsafe {
        let a = solve_args(e, y, truth, opts, PG_SOLVER_GN)?;
        put(out, PgTrace(solve_gn_resampled(a.e, a.y, epsilon, a.truth, &gn_config(&a.opts))?))
    })
}

/// Wirtinger flow from `x0`. `truth` and `opts` may be null.
#[no_mangle]
pub unsafe extern "C" fn pg_wf_solve(
    e: *const PgEnsemble,
    y: *const PgObservations,
    x0: *const PgSignal,
    truth: *const PgSignal,
    opts: *const PgSolverOptions,
    out: *mut *mut PgTrace,
) -> PgStatus {
    guard(|| unsafe {
        let a = solve_args(e, y, truth, opts, PG_SOLVER_WF)?;
        put(out, PgTrace(wf_solve(a.e, a.y, &get(x0, "x0")?.0, a.truth, &baseline_config(&a.opts))?))
    })
}

/// Alternating minimization from `x0`. `truth` and `opts` may be null.
#[no_mangle]
pub unsafe extern "C" fn pg_altmin_solve(
    e: *const PgEnsemble,
    y: *const PgObservations,
    x0: *const PgSignal,
    truth: *const PgSignal,
    opts: *const PgSolverOptions,
    out: *mut *mut PgTrace,
) -> PgStatus {
    guard(|| unsafe {
        let a = solve_args(e, y, truth, opts, PG_SOLVER_ALTMIN)?;
        put(out, PgTrace(altmin_solve(a.e, a.y, &get(x0, "x0")?.0, a.truth, &baseline_config(&a.opts))?))
    })
}

// ---- traces ----

/// Steps taken; the trace holds one more point than this.
#[no_mangle]
pub unsafe extern "C" fn pg_trace_iterations(t: *const PgTrace) -> usize {
    unsafe { t.as_ref() }.map_or(0, |t| t.0.iterations())
}

#[no_mangle]
pub unsafe extern "C" fn pg_trace_status(t: *const PgTrace, out: *mut PgSolveStatus) -> PgStatus {
    guard(|| unsafe {
        let s = match &get(t, "trace")?.0.status {
            SolveStatus::Converged => PgSolveStatus::Converged,
            SolveStatus::MaxIterations => PgSolveStatus::MaxIterations,
            SolveStatus::Completed => PgSolveStatus::Completed,
            SolveStatus::StepFailed(_) => PgSolveStatus::StepFailed,
            SolveStatus::Diverged => PgSolveStatus::Diverged,
        };
        *out.as_mut().ok_or_else(|| null("out"))? = s;
        Ok(())
    })
}

/// Copy the relative errors of `x_0..x_T`; `len` must be iterations + 1.
#[no_mangle]
pub unsafe extern "C" fn pg_trace_rel_errors(t: *const PgTrace, out: *mut f64, len: usize) -> PgStatus {
    guard(|| unsafe {
        let t = &get(t, "trace")?.0;
        if len != t.rel_errors.len() {
            return Err(Fail(
                PgStatus::DimensionMismatch,
                format!("buffer holds {len} doubles, trace has {}", t.rel_errors.len()),
            ));
        }
        slice_mut(out, len, "out")?.copy_from_slice(&t.rel_errors);
        Ok(())
    })
}

/// New signal handle holding the last iterate.
#[no_mangle]
pub unsafe extern "C" fn pg_trace_final_iterate(t: *const PgTrace, out: *mut *mut PgSignal) -> PgStatus {
    guard(|| unsafe { put(out, PgSignal(get(t, "trace")?.0.final_iterate().clone())) })
}

/// Write `iter,rel_err,residual,wall_ms,flags` rows to the UTF-8 `path`.
#[no_mangle]
pub unsafe extern "C" fn pg_trace_write_csv(t: *const PgTrace, path: *const c_char) -> PgStatus {
    guard(|| unsafe {
        let t = &get(t, "trace")?.0;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        t.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pg_trace_free(t: *mut PgTrace) {
    unsafe { drop_handle(t) }
}
