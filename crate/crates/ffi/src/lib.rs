// SPDX-License-Identifier: Apache-2.0

//! C ABI over `dwcav`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`DwcavStatus`]; on failure `dwcav_last_error()` holds a message for the
//! calling thread until its next failing call. Outputs are written through
//! caller-provided pointers only on success. No call keeps a pointer passed
//! to it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dwcav::entanglement::{analyze_point, log_negativity, EntanglementResult};
use dwcav::material::FrequencyConvention;
use dwcav::steadystate::{bifurcation_amplitude, solve_mean_field};
use dwcav::sweep::{find_cutoff_temperature, CutoffSearch, WorkingPoint, CUT_OFFSET};
use dwcav::{Error, ReducedCoords, SystemParams};

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwcavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParam = 2,
    Domain = 3,
    UndefinedRoot = 4,
    Unstable = 5,
    Conditioning = 6,
    Unphysical = 7,
    NonConvergence = 8,
    Bracket = 9,
    Config = 10,
    Numerical = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// System parameters.
pub struct DwcavParams(SystemParams);

/// Entanglement measures at one point.
pub struct DwcavResult(EntanglementResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DwcavStatus {
    match e {
        Error::InvalidParam { .. } => DwcavStatus::InvalidParam,
        Error::Domain(_) => DwcavStatus::Domain,
        Error::UndefinedRoot { .. } | Error::NonRealRoot(_) => DwcavStatus::UndefinedRoot,
        Error::Unstable { .. } => DwcavStatus::Unstable,
        Error::Conditioning(_) | Error::Singular(_) => DwcavStatus::Conditioning,
        Error::Unphysical(_) => DwcavStatus::Unphysical,
        Error::NonConvergence { .. } | Error::OracleTimeout(_) => DwcavStatus::NonConvergence,
        Error::Bracket { .. } => DwcavStatus::Bracket,
        Error::Config(_) | Error::Resolution(_) => DwcavStatus::Config,
        Error::Numerical(_) => DwcavStatus::Numerical,
        Error::Located { inner, .. } => status_of(inner),
    }
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), (DwcavStatus, String)>) -> DwcavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DwcavStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            DwcavStatus::Panic
        }
    }
}

fn lib<T>(r: dwcav::Result<T>) -> Result<T, (DwcavStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DwcavStatus, String) {
    (DwcavStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DwcavStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), (DwcavStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failing call on this thread; empty if none. Valid
/// until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn dwcav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dwcav_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr() as *const c_char
}

/// Two walls with equal coupling and damping, undriven, T = 0.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_new_two_walls(
    omega1: f64,
    omega2: f64,
    g: f64,
    kappa_a: f64,
    kappa: f64,
    out: *mut *mut DwcavParams,
) -> DwcavStatus {
    guard(|| {
        let p = SystemParams::two_walls(omega1, omega2, g, kappa_a, kappa);
        lib(p.validate())?;
        put(out, Box::into_raw(Box::new(DwcavParams(p))), "out")
    })
}

/// κ_a = 2 MHz, κ_j = 1 MHz, ω_1 = 1 GHz, g_j = 1 MHz, T = 2 mK, ω_2 = ratio·ω_1.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_representative(
    omega_ratio: f64,
    out: *mut *mut DwcavParams,
) -> DwcavStatus {
    guard(|| {
        let p = SystemParams::representative(omega_ratio);
        lib(p.validate())?;
        put(out, Box::into_raw(Box::new(DwcavParams(p))), "out")
    })
}

/// Parameters from a JSON object with the fields of the CLI `params` section.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_from_json(
    json: *const c_char,
    out: *mut *mut DwcavParams,
) -> DwcavStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (DwcavStatus::Config, e.to_string()))?;
        let p: SystemParams =
            serde_json::from_str(s).map_err(|e| (DwcavStatus::Config, e.to_string()))?;
        lib(p.validate())?;
        put(out, Box::into_raw(Box::new(DwcavParams(p))), "out")
    })
}

/// # Safety
/// `p` must come from a `dwcav_params_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_free(p: *mut DwcavParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets the bath temperature in kelvin.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_set_temperature(p: *mut DwcavParams, t: f64) -> DwcavStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("params"))?;
        let mut q = h.0.clone();
        q.temperature = t;
        lib(q.validate())?;
        h.0 = q;
        Ok(())
    })
}

/// Frequency convention for thermal factors: 0 ordinary (ħ·2πf), 1 angular (ħω).
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_set_convention(
    p: *mut DwcavParams,
    angular: i32,
) -> DwcavStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("params"))?;
        h.0.convention = match angular {
            0 => FrequencyConvention::Ordinary,
            1 => FrequencyConvention::Angular,
            _ => {
                return Err((
                    DwcavStatus::InvalidParam,
                    "convention must be 0 or 1".into(),
                ))
            }
        };
        Ok(())
    })
}

/// Sets detuning Δ_a and real drive amplitude ξ.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwcav_params_set_drive(
    p: *mut DwcavParams,
    delta_a: f64,
    xi: f64,
) -> DwcavStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("params"))?;
        let q = h.0.clone().with_drive(delta_a, xi);
        lib(q.validate())?;
        h.0 = q;
        Ok(())
    })
}

/// Mean photon numbers of the real mean-field roots at the current drive,
/// ascending. `count` receives the number of roots (1 or 3, at most 3). Fails
/// with BufferTooSmall, setting `count`, if `cap` is smaller.
///
/// # Safety
/// `n_bar` must hold `cap` doubles; `count` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_mean_field(
    p: *const DwcavParams,
    n_bar: *mut f64,
    cap: usize,
    count: *mut usize,
) -> DwcavStatus {
    guard(|| {
        let h = get(p, "params")?;
        let roots = lib(solve_mean_field(&h.0))?;
        put(count, roots.len(), "count")?;
        if roots.len() > cap {
            return Err((
                DwcavStatus::BufferTooSmall,
                format!("need {} slots", roots.len()),
            ));
        }
        if n_bar.is_null() && !roots.is_empty() {
            return Err(null("n_bar"));
        }
        for (i, r) in roots.iter().enumerate() {
            n_bar.add(i).write(r.n_bar);
        }
        Ok(())
    })
}

/// G*(Δ̃) of the transcritical line, Δ̃ < 0.
///
/// # Safety
/// `p` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_bifurcation_amplitude(
    p: *const DwcavParams,
    delta_tilde: f64,
    out: *mut f64,
) -> DwcavStatus {
    guard(|| {
        let h = get(p, "params")?;
        put(out, lib(bifurcation_amplitude(delta_tilde, &h.0))?, "out")
    })
}

/// Full pipeline at (G_eff, Δ̃). Δ̃ is absolute.
///
/// # Safety
/// `p` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_analyze_point(
    p: *const DwcavParams,
    g_eff: f64,
    delta_tilde: f64,
    out: *mut *mut DwcavResult,
) -> DwcavStatus {
    guard(|| {
        let h = get(p, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        lib(h.0.validate())?;
        if h.0.n_modes() != 2 || h.0.g[0] == 0.0 {
            return Err((
                DwcavStatus::InvalidParam,
                "need two walls and g_1 != 0".into(),
            ));
        }
        let rc = ReducedCoords::from_geff(g_eff, delta_tilde, &h.0);
        let r = lib(analyze_point(rc, &h.0))?;
        put(out, Box::into_raw(Box::new(DwcavResult(r))), "out")
    })
}

/// # Safety
/// `r` must come from `dwcav_analyze_point` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dwcav_result_free(r: *mut DwcavResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Log negativity maximized over stable roots. `pair`: 0 for walls 1|2,
/// 1 for cavity|wall 1, 2 for cavity|wall 2. NaN without a stable root.
///
/// # Safety
/// `r` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_result_log_negativity(
    r: *const DwcavResult,
    pair: u32,
    out: *mut f64,
) -> DwcavStatus {
    guard(|| {
        let h = get(r, "result")?;
        let e = h.0.e();
        let v = *e
            .get(pair as usize)
            .ok_or_else(|| (DwcavStatus::InvalidParam, "pair must be 0, 1 or 2".into()))?;
        put(out, v, "out")
    })
}

/// Smallest ordinary eigenvalue of the pair covariance, minimized over stable
/// roots; pairs as in `dwcav_result_log_negativity`.
///
/// # Safety
/// `r` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_result_nu_min(
    r: *const DwcavResult,
    pair: u32,
    out: *mut f64,
) -> DwcavStatus {
    guard(|| {
        let h = get(r, "result")?;
        let v =
            *h.0.nu_min()
                .get(pair as usize)
                .ok_or_else(|| (DwcavStatus::InvalidParam, "pair must be 0, 1 or 2".into()))?;
        put(out, v, "out")
    })
}

/// Numbers of real and of stable roots.
///
/// # Safety
/// `r` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dwcav_result_root_counts(
    r: *const DwcavResult,
    n_real: *mut usize,
    n_stable: *mut usize,
) -> DwcavStatus {
    guard(|| {
        let h = get(r, "result")?;
        put(n_real, h.0.n_real_roots, "n_real")?;
        put(n_stable, h.0.stable_roots.len(), "n_stable")
    })
}

/// Result as a JSON string, released with `dwcav_string_free`.
///
/// # Safety
/// `r` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_result_to_json(
    r: *const DwcavResult,
    out: *mut *mut c_char,
) -> DwcavStatus {
    guard(|| {
        let h = get(r, "result")?;
        let s = serde_json::to_string(&h.0).map_err(|e| (DwcavStatus::Numerical, e.to_string()))?;
        let c = CString::new(s).map_err(|e| (DwcavStatus::Numerical, e.to_string()))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dwcav_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Log negativity of a two-mode covariance given as 16 doubles, row-major,
/// ordering (x1, p1, x2, p2).
///
/// # Safety
/// `v4` must point to 16 doubles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_log_negativity(v4: *const f64, out: *mut f64) -> DwcavStatus {
    guard(|| {
        if v4.is_null() {
            return Err(null("v4"));
        }
        let s = std::slice::from_raw_parts(v4, 16);
        let m = nalgebra::DMatrix::from_row_slice(4, 4, s);
        put(out, lib(log_negativity(&m))?, "out")
    })
}

/// Temperature at which E_12 at Δ̃ = delta_over_omega·ω_1 on the
/// bifurcation line drops below `threshold`, bisected in [t_lo, t_hi].
///
/// # Safety
/// `p` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dwcav_cutoff_temperature(
    p: *const DwcavParams,
    delta_over_omega: f64,
    threshold: f64,
    t_lo: f64,
    t_hi: f64,
    out: *mut f64,
) -> DwcavStatus {
    guard(|| {
        let h = get(p, "params")?;
        let wp = WorkingPoint {
            delta_over_omega,
            offset: CUT_OFFSET,
            ..WorkingPoint::default()
        };
        let search = CutoffSearch {
            threshold,
            t_lo,
            t_hi,
            ..CutoffSearch::default()
        };
        put(out, lib(find_cutoff_temperature(&h.0, wp, search))?, "out")
    })
}
