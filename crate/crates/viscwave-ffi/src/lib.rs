//! C ABI over the viscwave simulator.
//!
//! Every entry point returns a [`VwStatus`]. On failure the message is kept
//! per thread and can be copied out with [`vw_last_error_message`].
//! Simulations live behind the opaque [`VwSim`] handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use viscwave::config::parse_config;
use viscwave::error::Error;
use viscwave::evolution::{linear_propagator, linear_propagator_mollified, Integrator, SimState};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Geometry = 4,
    Contraction = 5,
    Domain = 6,
    NonFinite = 7,
    BufferTooSmall = 8,
    InvalidArgument = 9,
    Panic = 10,
    Internal = 11,
}

/// Which field of the state to read or write.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VwField {
    Interface = 0,
    Potential = 1,
}

/// Opaque simulation handle.
pub struct VwSim {
    int: Integrator,
    state: SimState,
    dt: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> VwStatus {
    match err {
        Error::Config(_) | Error::ConfigAt { .. } => VwStatus::Config,
        Error::NonFinite { .. } => VwStatus::NonFinite,
        Error::Singular { .. } | Error::NotDiffeomorphism { .. } | Error::GeometryDegenerate { .. } => {
            VwStatus::Geometry
        }
        Error::Contraction { .. } => VwStatus::Contraction,
        Error::Domain(_) => VwStatus::Domain,
        Error::Step { source, .. } => status_of(source),
        _ => VwStatus::Internal,
    }
}

fn fail(status: VwStatus, msg: impl Into<String>) -> VwStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), VwStatus>>(f: F) -> VwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(VwStatus::Panic, "internal panic"),
    }
}

fn check(r: viscwave::error::Result<()>) -> Result<(), VwStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn sim_mut<'a>(sim: *mut VwSim) -> Result<&'a mut VwSim, VwStatus> {
    sim.as_mut().ok_or_else(|| fail(VwStatus::NullPointer, "null simulation handle"))
}

unsafe fn sim_ref<'a>(sim: *const VwSim) -> Result<&'a VwSim, VwStatus> {
    sim.as_ref().ok_or_else(|| fail(VwStatus::NullPointer, "null simulation handle"))
}

fn out_ptr<T>(p: *mut T) -> Result<*mut T, VwStatus> {
    if p.is_null() {
        Err(fail(VwStatus::NullPointer, "null output pointer"))
    } else {
        Ok(p)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes). Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn vw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a simulation from TOML run-config text. The initial data is
/// realized from the config's preset at t = 0.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_new(config: *const c_char, out: *mut *mut VwSim) -> VwStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = std::ptr::null_mut();
        if config.is_null() {
            return Err(fail(VwStatus::NullPointer, "null config string"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| fail(VwStatus::InvalidUtf8, e.to_string()))?;
        let mut built = None;
        check((|| {
            let cfg = parse_config(text)?;
            let mut int = Integrator::new(cfg.model, cfg.settings())?;
            int.linear_only = cfg.flags.linear_only;
            let (h, xi) = cfg.initial_state()?;
            built = Some(VwSim { int, state: SimState::new(h, xi, 0.0)?, dt: cfg.time.dt });
            Ok(())
        })())?;
        *out = Box::into_raw(Box::new(built.expect("built on success")));
        Ok(())
    })
}

/// Releases a handle from [`vw_sim_new`]. Null is ignored.
///
/// # Safety
/// `sim` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_free(sim: *mut VwSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// One step of the configured size. The state is unchanged on failure.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_step(sim: *mut VwSim) -> VwStatus {
    guard(|| {
        let sim = sim_mut(sim)?;
        let dt = sim.dt;
        let next = sim.int.step(&mut sim.state, dt).map_err(|e| fail(status_of(&e), e.to_string()))?;
        sim.state = next;
        Ok(())
    })
}

/// Steps until `t_end`, shortening the last step to land on it.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_advance(sim: *mut VwSim, t_end: f64) -> VwStatus {
    guard(|| {
        let sim = sim_mut(sim)?;
        if !t_end.is_finite() {
            return Err(fail(VwStatus::InvalidArgument, "t_end must be finite"));
        }
        let mut state = sim.state.clone();
        let dt = sim.dt;
        check(sim.int.advance(&mut state, dt, t_end))?;
        sim.state = state;
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_time(sim: *const VwSim, t: *mut f64) -> VwStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *out_ptr(t)? = sim.state.t;
        Ok(())
    })
}

/// Mean removed by the last step's zero-mean projection.
///
/// # Safety
/// `sim` must be a live handle; `drift` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_mean_drift(sim: *const VwSim, drift: *mut f64) -> VwStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *out_ptr(drift)? = sim.state.mean_drift;
        Ok(())
    })
}

/// Number of stored coefficients per field, N/2 + 1 (modes 0..=N/2).
///
/// # Safety
/// `sim` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_coeff_len(sim: *const VwSim, len: *mut usize) -> VwStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        *out_ptr(len)? = sim.state.h.half().len();
        Ok(())
    })
}

/// Copies the Fourier coefficients of modes 0..=N/2 as interleaved
/// (re, im) pairs. `len` counts doubles and must be at least twice
/// [`vw_sim_coeff_len`].
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vw_sim_coefficients(
    sim: *const VwSim,
    field: VwField,
    out: *mut f64,
    len: usize,
) -> VwStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let out = out_ptr(out)?;
        let f = match field {
            VwField::Interface => &sim.state.h,
            VwField::Potential => &sim.state.xi,
        };
        let half = f.half();
        if len < 2 * half.len() {
            return Err(fail(
                VwStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", 2 * half.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * half.len());
        for (pair, c) in dst.chunks_exact_mut(2).zip(half) {
            pair[0] = c.re;
            pair[1] = c.im;
        }
        Ok(())
    })
}

/// Exact linear propagator for mode `n` over `dt`, row-major 2×2 acting on
/// (ξ̂, ĥ). With `kappa > 0` the mollified symbol is used.
///
/// # Safety
/// `out` must be valid for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn vw_linear_propagator(n: usize, alpha: f64, kappa: f64, dt: f64, out: *mut f64) -> VwStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if !(alpha > 0.0 && alpha.is_finite() && kappa >= 0.0 && kappa.is_finite() && dt.is_finite()) {
            return Err(fail(VwStatus::InvalidArgument, "need alpha > 0, kappa >= 0 and finite dt"));
        }
        let m = if kappa > 0.0 {
            linear_propagator_mollified(n, alpha, kappa, dt)
        } else {
            linear_propagator(n, alpha, dt)
        };
        let dst = std::slice::from_raw_parts_mut(out, 4);
        dst.copy_from_slice(&[m[0][0], m[0][1], m[1][0], m[1][1]]);
        Ok(())
    })
}
