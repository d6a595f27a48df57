//! C interface: opaque handles, status codes and a thread-local last error.
//!
//! Every function returns a [`KsStatus`]; on failure the message is kept
//! until the next call on the same thread and can be read with
//! [`ks_last_error_message`]. Handles are released with the matching
//! `_free` function; passing NULL to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use korn_shell::discretization::{assemble_forms, build_mesh, AssembledForms, Resolution};
use korn_shell::eigensolver::{korn_constant, PencilProblem};
use korn_shell::geometry::ShellDomain;
use korn_shell::harness::{fit_exponent, run_sweep, write_sweep_outputs, ExperimentConfig, RowStatus, ScalingReport};
use korn_shell::KornError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Mesh = 4,
    Assembly = 5,
    NonConvergence = 6,
    Configuration = 7,
    Data = 8,
    Resolution = 9,
    Unsupported = 10,
    Factorization = 11,
    Io = 12,
    Panic = 13,
}

/// A shell domain: mid-surface charts, half-thickness, boundary condition.
pub struct KsShell(ShellDomain);

/// Assembled finite element forms on one mesh.
pub struct KsForms(AssembledForms);

/// A parsed experiment configuration.
pub struct KsConfig(ExperimentConfig);

/// The result of a thickness sweep.
pub struct KsReport(ScalingReport);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct KsEigenSummary {
    pub lambda_min: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct KsFit {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct KsRow {
    pub h: f64,
    pub k_eigen: f64,
    /// NaN when the ansatz path does not apply.
    pub k_ansatz: f64,
    pub dofs: usize,
    pub iterations: usize,
    pub ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &KornError) -> KsStatus {
    match e {
        KornError::Domain(_) => KsStatus::Domain,
        KornError::Mesh { .. } => KsStatus::Mesh,
        KornError::Assembly { .. } => KsStatus::Assembly,
        KornError::NonConvergence { .. } => KsStatus::NonConvergence,
        KornError::Configuration(_) => KsStatus::Configuration,
        KornError::Data(_) => KsStatus::Data,
        KornError::Resolution { .. } => KsStatus::Resolution,
        KornError::Unsupported(_) => KsStatus::Unsupported,
        KornError::Factorization(_) => KsStatus::Factorization,
        KornError::Io(_) => KsStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Korn(KornError),
}

impl From<KornError> for Failure {
    fn from(e: KornError) -> Self {
        Failure::Korn(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KsStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            KsStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            KsStatus::InvalidArgument
        }
        Ok(Err(Failure::Korn(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            KsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ks_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn boxed<T>(slot: &mut *mut T, value: T) {
    *slot = Box::into_raw(Box::new(value));
}

/// Closed sphere of radius `radius` and half-thickness `h`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_shell_sphere(radius: f64, h: f64, out_shell: *mut *mut KsShell) -> KsStatus {
    guard(|| {
        let slot = unsafe { out(out_shell, "out_shell") }?;
        boxed(slot, KsShell(ShellDomain::closed_sphere(radius, h)?));
        Ok(())
    })
}

/// Cylinder clamped at both ends.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_shell_cylinder(radius: f64, length: f64, h: f64, out_shell: *mut *mut KsShell) -> KsStatus {
    guard(|| {
        let slot = unsafe { out(out_shell, "out_shell") }?;
        boxed(slot, KsShell(ShellDomain::cylinder(radius, length, h)?));
        Ok(())
    })
}

/// Spherical cap clamped along its boundary.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_shell_cap(radius: f64, half_angle: f64, h: f64, out_shell: *mut *mut KsShell) -> KsStatus {
    guard(|| {
        let slot = unsafe { out(out_shell, "out_shell") }?;
        boxed(slot, KsShell(ShellDomain::spherical_cap(radius, half_angle, h)?));
        Ok(())
    })
}

/// # Safety
/// `shell` must be NULL or a handle from a `ks_shell_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn ks_shell_free(shell: *mut KsShell) {
    if !shell.is_null() {
        drop(unsafe { Box::from_raw(shell) });
    }
}

/// Mesh the shell with `n_u × n_v × n_t` cells per chart and assemble the
/// forms with Lagrange elements of `order` and `quadrature` Gauss points.
///
/// # Safety
/// `shell` must be a live handle and `out_forms` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_forms_assemble(
    shell: *const KsShell,
    n_u: usize,
    n_v: usize,
    n_t: usize,
    order: usize,
    quadrature: usize,
    out_forms: *mut *mut KsForms,
) -> KsStatus {
    guard(|| {
        let shell = unsafe { get(shell, "shell") }?;
        let slot = unsafe { out(out_forms, "out_forms") }?;
        let mesh = build_mesh(&shell.0, Resolution::new(n_u, n_v, n_t))?;
        boxed(slot, KsForms(assemble_forms(&mesh, order, quadrature)?));
        Ok(())
    })
}

/// Number of free degrees of freedom.
///
/// # Safety
/// `forms` must be a live handle and `out_dim` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_forms_dim(forms: *const KsForms, out_dim: *mut usize) -> KsStatus {
    guard(|| {
        let forms = unsafe { get(forms, "forms") }?;
        *unsafe { out(out_dim, "out_dim") }? = forms.0.dim();
        Ok(())
    })
}

/// # Safety
/// `forms` must be NULL or a handle from [`ks_forms_assemble`].
#[no_mangle]
pub unsafe extern "C" fn ks_forms_free(forms: *mut KsForms) {
    if !forms.is_null() {
        drop(unsafe { Box::from_raw(forms) });
    }
}

/// Smallest eigenvalue of the Korn pencil. If `vector` is not NULL it must
/// hold `vector_len == dim` doubles and receives the M-normalized eigenvector.
///
/// # Safety
/// `forms` must be a live handle, `summary` a valid pointer and `vector`
/// NULL or valid for `vector_len` writes.
#[no_mangle]
pub unsafe extern "C" fn ks_korn_constant(
    forms: *const KsForms,
    tolerance: f64,
    max_iterations: usize,
    summary: *mut KsEigenSummary,
    vector: *mut f64,
    vector_len: usize,
) -> KsStatus {
    guard(|| {
        let forms = unsafe { get(forms, "forms") }?;
        let summary = unsafe { out(summary, "summary") }?;
        if !vector.is_null() && vector_len != forms.0.dim() {
            return Err(Failure::Invalid(format!(
                "vector_len {vector_len} differs from the dimension {}",
                forms.0.dim()
            )));
        }
        let problem = PencilProblem::new(&forms.0)?
            .with_tolerance(tolerance)
            .with_max_iterations(max_iterations);
        let r = korn_constant(&problem)?;
        *summary = KsEigenSummary {
            lambda_min: r.lambda_min,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        };
        if !vector.is_null() {
            unsafe { std::slice::from_raw_parts_mut(vector, vector_len) }.copy_from_slice(&r.vector);
        }
        Ok(())
    })
}

/// Least-squares fit of `log k = β log h + c`.
///
/// # Safety
/// `h` and `k` must be valid for `n` reads and `fit` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_fit_exponent(h: *const f64, k: *const f64, n: usize, fit: *mut KsFit) -> KsStatus {
    guard(|| {
        if h.is_null() || k.is_null() {
            return Err(Failure::Null("h or k"));
        }
        let fit = unsafe { out(fit, "fit") }?;
        let hs = unsafe { std::slice::from_raw_parts(h, n) };
        let ks = unsafe { std::slice::from_raw_parts(k, n) };
        let rows: Vec<(f64, f64)> = hs.iter().copied().zip(ks.iter().copied()).collect();
        let f = fit_exponent(&rows)?;
        *fit = KsFit {
            beta: f.beta,
            intercept: f.intercept,
            r_squared: f.r_squared,
        };
        Ok(())
    })
}

/// Parse `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out_config` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_config_parse(text: *const c_char, out_config: *mut *mut KsConfig) -> KsStatus {
    guard(|| {
        let text = unsafe { string(text, "text") }?;
        let slot = unsafe { out(out_config, "out_config") }?;
        boxed(slot, KsConfig(ExperimentConfig::parse(text)?));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from [`ks_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn ks_config_free(config: *mut KsConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Run the thickness sweep. Rows that fail are kept and marked; the call
/// itself fails only on invalid configuration.
///
/// # Safety
/// `config` must be a live handle and `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_run_sweep(config: *const KsConfig, out_report: *mut *mut KsReport) -> KsStatus {
    guard(|| {
        let config = unsafe { get(config, "config") }?;
        let slot = unsafe { out(out_report, "out_report") }?;
        boxed(slot, KsReport(run_sweep(&config.0)?));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle and `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_report_row_count(report: *const KsReport, out_count: *mut usize) -> KsStatus {
    guard(|| {
        let report = unsafe { get(report, "report") }?;
        *unsafe { out(out_count, "out_count") }? = report.0.rows.len();
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle and `row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_report_row(report: *const KsReport, index: usize, row: *mut KsRow) -> KsStatus {
    guard(|| {
        let report = unsafe { get(report, "report") }?;
        let row = unsafe { out(row, "row") }?;
        let r = report
            .0
            .rows
            .get(index)
            .ok_or_else(|| Failure::Invalid(format!("row {index} out of range")))?;
        *row = KsRow {
            h: r.h,
            k_eigen: r.k_eigen,
            k_ansatz: r.k_ansatz.unwrap_or(f64::NAN),
            dofs: r.dofs,
            iterations: r.iterations,
            ok: r.status == RowStatus::Ok,
        };
        Ok(())
    })
}

/// The fitted exponent; fails with `Data` when fewer than three rows converged.
///
/// # Safety
/// `report` must be a live handle and `fit` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ks_report_fit(report: *const KsReport, fit: *mut KsFit) -> KsStatus {
    guard(|| {
        let report = unsafe { get(report, "report") }?;
        let fit = unsafe { out(fit, "fit") }?;
        let f = report
            .0
            .fit
            .ok_or_else(|| Failure::Korn(KornError::Data("no exponent fit available".into())))?;
        *fit = KsFit {
            beta: f.beta,
            intercept: f.intercept,
            r_squared: f.r_squared,
        };
        Ok(())
    })
}

/// Write `scaling.csv`, `scaling.dat` and `report.txt` into `dir`.
///
/// # Safety
/// `report` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ks_report_write(report: *const KsReport, dir: *const c_char) -> KsStatus {
    guard(|| {
        let report = unsafe { get(report, "report") }?;
        let dir = unsafe { string(dir, "dir") }?;
        write_sweep_outputs(&report.0, Path::new(dir))?;
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle from [`ks_run_sweep`].
#[no_mangle]
pub unsafe extern "C" fn ks_report_free(report: *mut KsReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}
