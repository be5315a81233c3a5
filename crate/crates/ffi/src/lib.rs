//! C interface to `cgl-core`.
//!
//! Fields and solvers are opaque heap handles created by `*_new` calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CglStatus`]; on failure the message is kept per thread and can be read
//! with [`cgl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cgl_core::dynamics::{evolve, random_initial_state, CglParams};
use cgl_core::lattice::{enumerate_shell, schur_bound, search_separated_n, PhiSpectrum, WaveVector};
use cgl_core::spectral::{GridSpec, SpectralField};
use cgl_core::CglError;
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CglStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeMismatch = 3,
    BufferTooSmall = 4,
    NonFinite = 5,
    BlowUp = 6,
    Internal = 7,
}

/// Spectral coefficients of a field on an `M³` grid.
pub struct CglField(SpectralField);

/// Model parameters and time step for the cubic equation.
pub struct CglSolver(CglParams);

/// Schur-test certificate for one shell.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CglShellCertificate {
    pub n: u64,
    pub l: u64,
    pub rho: f64,
    pub population: u64,
    /// `+inf` when the shell has fewer than two points.
    pub min_separation: f64,
    pub eps_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &CglError) -> CglStatus {
    match err {
        CglError::InvalidArgument(_) | CglError::SupportExceedsTruncation { .. } => CglStatus::InvalidArgument,
        CglError::SizeMismatch { .. } => CglStatus::SizeMismatch,
        CglError::NonFinite { .. } => CglStatus::NonFinite,
        CglError::BlowUp { .. } => CglStatus::BlowUp,
        _ => CglStatus::Internal,
    }
}

fn fail(status: CglStatus, msg: impl Into<String>) -> CglStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning core errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CglStatus>) -> CglStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CglStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(CglStatus::Internal, "panic inside cgl"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, CglStatus>;
}

impl<T> OrStatus<T> for cgl_core::Result<T> {
    fn or_status(self) -> Result<T, CglStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), CglStatus> {
    if p.is_null() {
        Err(fail(CglStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cgl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Writes the points of `{k : |k|² ∈ [N−L, N+L]}` as `(k1, k2, k3)` triples.
///
/// `out` may be null to query the size only; `*len` always receives the
/// number of points. Fails with `BufferTooSmall` if `capacity` points do
/// not fit.
///
/// # Safety
/// `out` must be null or valid for `3 * capacity` writes; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgl_enumerate_shell(
    n: u64,
    l: u64,
    out: *mut i32,
    capacity: usize,
    len: *mut usize,
) -> CglStatus {
    guard(|| {
        non_null(len, "len")?;
        let shell = enumerate_shell(n, l).or_status()?;
        *len = shell.len();
        if out.is_null() {
            return Ok(());
        }
        if shell.len() > capacity {
            return Err(fail(CglStatus::BufferTooSmall, format!("{} points, capacity {capacity}", shell.len())));
        }
        let out = std::slice::from_raw_parts_mut(out, 3 * shell.len());
        for (chunk, k) in out.chunks_exact_mut(3).zip(&shell) {
            chunk.copy_from_slice(&[k.k1, k.k2, k.k3]);
        }
        Ok(())
    })
}

/// Writes every `N ∈ [n_min, n_max]` whose shell has minimum separation
/// at least `rho`. Same buffer protocol as [`cgl_enumerate_shell`].
///
/// # Safety
/// `out` must be null or valid for `capacity` writes; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgl_search_separated(
    l: u64,
    rho: f64,
    n_min: u64,
    n_max: u64,
    out: *mut u64,
    capacity: usize,
    len: *mut usize,
) -> CglStatus {
    guard(|| {
        non_null(len, "len")?;
        let found = search_separated_n(l, rho, n_min, n_max).or_status()?;
        *len = found.len();
        if out.is_null() {
            return Ok(());
        }
        if found.len() > capacity {
            return Err(fail(CglStatus::BufferTooSmall, format!("{} values, capacity {capacity}", found.len())));
        }
        std::slice::from_raw_parts_mut(out, found.len()).copy_from_slice(&found);
        Ok(())
    })
}

/// Certifies the multiplier with Fourier data `φ̂(k_j) = re_j + i im_j` on
/// the shell `(n, l)`. `ks` holds `count` triples.
///
/// # Safety
/// `ks` must be valid for `3 * count` reads, `re` and `im` for `count`
/// reads, and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn cgl_schur_bound(
    truncation: i32,
    ks: *const i32,
    re: *const f64,
    im: *const f64,
    count: usize,
    n: u64,
    l: u64,
    rho: f64,
    out: *mut CglShellCertificate,
) -> CglStatus {
    guard(|| {
        non_null(out, "out")?;
        if count > 0 {
            non_null(ks, "ks")?;
            non_null(re, "re")?;
            non_null(im, "im")?;
        }
        let entries: Vec<(WaveVector, Complex64)> = (0..count)
            .map(|j| {
                let k = WaveVector::new(*ks.add(3 * j), *ks.add(3 * j + 1), *ks.add(3 * j + 2));
                (k, Complex64::new(*re.add(j), *im.add(j)))
            })
            .collect();
        let phi = PhiSpectrum::new(truncation, entries).or_status()?;
        let cert = schur_bound(&phi, n, l, rho).or_status()?;
        *out = CglShellCertificate {
            n: cert.n,
            l: cert.l,
            rho: cert.rho,
            population: cert.population,
            min_separation: cert.min_separation,
            eps_bound: cert.eps_bound,
        };
        Ok(())
    })
}

/// Creates the zero field on an `m³` grid (`m` even, at least 4).
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_new(m: usize, out: *mut *mut CglField) -> CglStatus {
    guard(|| {
        non_null(out, "out")?;
        let grid = GridSpec::new(m).or_status()?;
        *out = Box::into_raw(Box::new(CglField(SpectralField::zeros(grid))));
        Ok(())
    })
}

/// Random smooth initial data, reproducible from `seed`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_random(m: usize, seed: u64, amplitude: f64, out: *mut *mut CglField) -> CglStatus {
    guard(|| {
        non_null(out, "out")?;
        let grid = GridSpec::new(m).or_status()?;
        *out = Box::into_raw(Box::new(CglField(random_initial_state(grid, seed, amplitude))));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_free(field: *mut CglField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle; `re` and `im` valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_get(
    field: *const CglField,
    k1: i32,
    k2: i32,
    k3: i32,
    re: *mut f64,
    im: *mut f64,
) -> CglStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(re, "re")?;
        non_null(im, "im")?;
        let c = (*field).0.get(WaveVector::new(k1, k2, k3));
        *re = c.re;
        *im = c.im;
        Ok(())
    })
}

/// Sets one Fourier coefficient; the mode must lie on the grid.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_set(field: *mut CglField, k1: i32, k2: i32, k3: i32, re: f64, im: f64) -> CglStatus {
    guard(|| {
        non_null(field, "field")?;
        let field = &mut *field;
        field.0.set(WaveVector::new(k1, k2, k3), Complex64::new(re, im)).or_status()
    })
}

/// Sobolev norm `‖Ψ‖_{H^s}`; `s = 0` gives the physical `L²` norm.
///
/// # Safety
/// `field` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cgl_field_norm(field: *const CglField, s: f64, out: *mut f64) -> CglStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(out, "out")?;
        *out = if s == 0.0 { (*field).0.l2_norm() } else { (*field).0.sobolev_norm(s) };
        Ok(())
    })
}

/// Solver for `∂tΨ = (1+iω)ΔΨ + (1+iβ)Ψ − (1+iδ)Ψ|Ψ|²` on an `m³` grid.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cgl_solver_new(
    omega: f64,
    beta: f64,
    delta: f64,
    m: usize,
    dt: f64,
    out: *mut *mut CglSolver,
) -> CglStatus {
    guard(|| {
        non_null(out, "out")?;
        let grid = GridSpec::new(m).or_status()?;
        let params = CglParams::cubic(omega, beta, delta, grid, dt).or_status()?;
        *out = Box::into_raw(Box::new(CglSolver(params)));
        Ok(())
    })
}

/// # Safety
/// `solver` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn cgl_solver_free(solver: *mut CglSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances `field` in place by `horizon`. On blow-up the field holds the
/// last finite state and `BlowUp` is returned.
///
/// # Safety
/// `solver` and `field` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn cgl_solver_evolve(solver: *const CglSolver, field: *mut CglField, horizon: f64) -> CglStatus {
    guard(|| {
        non_null(solver, "solver")?;
        non_null(field, "field")?;
        let (params, field) = (&(*solver).0, &mut *field);
        if field.0.grid() != params.grid {
            return Err(fail(
                CglStatus::SizeMismatch,
                format!("field grid {} but solver grid {}", field.0.grid().size(), params.grid.size()),
            ));
        }
        match evolve(params, &field.0, horizon) {
            Ok(next) => {
                field.0 = next;
                Ok(())
            }
            Err(CglError::BlowUp { time, last_finite }) => {
                field.0 = *last_finite;
                Err(fail(CglStatus::BlowUp, format!("solution blew up at t = {time}")))
            }
            Err(e) => Err(fail(status_of(&e), e.to_string())),
        }
    })
}
