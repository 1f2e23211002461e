//! C ABI for `nanodecoh`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`NdcStatus`]; results go through
//!   out-pointers, which are left untouched on failure.
//! * The message of the most recent failure on the calling thread is
//!   available from [`ndc_last_error_message`].
//! * Spectra and band profiles are opaque handles created by `*_new` or
//!   `*_solve` functions and released with the matching `*_free`.
//! * Panics never cross the boundary; they are reported as
//!   [`NdcStatus::NdcErrPanic`].
//!
//! All frequencies are angular (rad/s) and all times are seconds.
//!
//! # Safety
//!
//! Every pointer argument must be null or valid for the access its
//! documentation describes: array inputs for `len` reads, out-pointers for
//! one write, handles as returned by this library and not yet freed.
//! Handles are not synchronized; share one between threads only with
//! external locking.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nanodecoh::bandbend::{self, BandConfig, BandProfile};
use nanodecoh::error::Error;
use nanodecoh::filterfn::{self, DecouplingSequence};
use nanodecoh::fitkit;
use nanodecoh::spectra::{reference, NoiseSpectrum, OneOverFComponent};
use nanodecoh::trace::CoherenceTrace;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdcStatus {
    NdcOk = 0,
    /// A required pointer argument was null.
    NdcErrNullPointer = 1,
    /// An argument was out of range or inconsistent.
    NdcErrInvalidArgument = 2,
    /// A value outside the domain of the function (e.g. `ω ≤ 0`).
    NdcErrDomain = 3,
    /// Input data were unusable (too few points, bad shapes).
    NdcErrData = 4,
    /// Quadrature, root finding, fitting or a solver failed.
    NdcErrNumerical = 5,
    /// An internal panic was caught.
    NdcErrPanic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut m: String = msg.into();
    m.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(m).ok());
}

fn status_of(err: &Error) -> NdcStatus {
    match err {
        Error::InvalidParameter(_) => NdcStatus::NdcErrInvalidArgument,
        Error::Domain(_) | Error::Indeterminate(_) => NdcStatus::NdcErrDomain,
        e if e.is_numerical() => NdcStatus::NdcErrNumerical,
        _ => NdcStatus::NdcErrData,
    }
}

/// Runs `f`, recording any error or panic for [`ndc_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), (NdcStatus, String)>) -> NdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NdcStatus::NdcOk,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            NdcStatus::NdcErrPanic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (NdcStatus, String)>;
}

impl<T> IntoFfi<T> for nanodecoh::error::Result<T> {
    fn ffi(self) -> Result<T, (NdcStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (NdcStatus, String) {
    (NdcStatus::NdcErrNullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NdcStatus, String) {
    (NdcStatus::NdcErrInvalidArgument, msg.into())
}

/// Borrows `len` elements, rejecting null unless `len == 0`.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (NdcStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (NdcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len − 1` bytes) and returns the full message
/// length without the terminator. Returns 0 when there is no error; `buf`
/// may be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn ndc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Clears the last error of this thread.
#[no_mangle]
pub extern "C" fn ndc_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ndc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// Spectra.

/// Opaque noise spectral density handle.
pub struct NdcSpectrum(NoiseSpectrum);

fn into_handle(s: NoiseSpectrum) -> *mut NdcSpectrum {
    Box::into_raw(Box::new(NdcSpectrum(s)))
}

unsafe fn spectrum<'a>(h: *const NdcSpectrum) -> Result<&'a NoiseSpectrum, (NdcStatus, String)> {
    h.as_ref().map(|s| &s.0).ok_or_else(|| null("spectrum handle"))
}

/// Creates an empty (zero) spectrum.
#[no_mangle]
pub extern "C" fn ndc_spectrum_new() -> *mut NdcSpectrum {
    into_handle(NoiseSpectrum::default())
}

/// The core-shell reference spectrum.
#[no_mangle]
pub extern "C" fn ndc_spectrum_core_shell() -> *mut NdcSpectrum {
    into_handle(reference::core_shell())
}

/// The bare-particle reference spectrum.
#[no_mangle]
pub extern "C" fn ndc_spectrum_bare() -> *mut NdcSpectrum {
    into_handle(reference::bare())
}

/// Releases a spectrum. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ndc_spectrum_free(h: *mut NdcSpectrum) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Adds `Δ²τ/(π(1 + ω²τ²))`.
#[no_mangle]
pub unsafe extern "C" fn ndc_spectrum_add_lorentzian(h: *mut NdcSpectrum, delta: f64, tau_c: f64) -> NdcStatus {
    guard(|| {
        let s = h.as_mut().ok_or_else(|| null("spectrum handle"))?;
        let next = s.0.clone().with_lorentzian(delta, tau_c);
        next.validate().ffi()?;
        s.0 = next;
        Ok(())
    })
}

/// Sets the `Δ_e/ω^a` term.
#[no_mangle]
pub unsafe extern "C" fn ndc_spectrum_set_one_over_f(h: *mut NdcSpectrum, delta_e: f64, exponent_a: f64) -> NdcStatus {
    guard(|| {
        let s = h.as_mut().ok_or_else(|| null("spectrum handle"))?;
        s.0.one_over_f = Some(OneOverFComponent::new(delta_e, exponent_a).ffi()?);
        Ok(())
    })
}

/// Sets the white floor `S₀`.
#[no_mangle]
pub unsafe extern "C" fn ndc_spectrum_set_white_floor(h: *mut NdcSpectrum, level: f64) -> NdcStatus {
    guard(|| {
        let s = h.as_mut().ok_or_else(|| null("spectrum handle"))?;
        let next = s.0.clone().with_white_floor(level);
        next.validate().ffi()?;
        s.0 = next;
        Ok(())
    })
}

/// `S(ω)`.
#[no_mangle]
pub unsafe extern "C" fn ndc_spectrum_density(h: *const NdcSpectrum, omega: f64, out: *mut f64) -> NdcStatus {
    guard(|| {
        let v = spectrum(h)?.eval_total(omega).ffi()?;
        *output(out, "out")? = v;
        Ok(())
    })
}

// Filter functions.

/// `κ`, the δ-approximation constant (π/2).
#[no_mangle]
pub extern "C" fn ndc_kappa() -> f64 {
    filterfn::kappa()
}

/// Dimensionless CPMG filter `F_N(x)`; 0 for `n_pulses == 0`.
#[no_mangle]
pub extern "C" fn ndc_filter_fn(x: f64, n_pulses: u32) -> f64 {
    if n_pulses == 0 {
        return 0.0;
    }
    filterfn::filter_fn(x, n_pulses)
}

/// Exact decoherence exponent `χ` for `n_pulses` ideal π pulses over
/// `total_time`.
#[no_mangle]
pub unsafe extern "C" fn ndc_chi_exact(h: *const NdcSpectrum, n_pulses: u32, total_time: f64, out: *mut f64) -> NdcStatus {
    guard(|| {
        let s = spectrum(h)?;
        if n_pulses == 0 {
            return Err(invalid("n_pulses must be >= 1"));
        }
        let v = filterfn::chi_exact(s, &DecouplingSequence::for_pulses(n_pulses, total_time)).ffi()?;
        *output(out, "out")? = v;
        Ok(())
    })
}

/// δ-peak approximation `χ ≈ κ t S(πN/t)/π`.
#[no_mangle]
pub unsafe extern "C" fn ndc_chi_delta(h: *const NdcSpectrum, n_pulses: u32, total_time: f64, out: *mut f64) -> NdcStatus {
    guard(|| {
        let v = filterfn::chi_delta(spectrum(h)?, n_pulses, total_time).ffi()?;
        *output(out, "out")? = v;
        Ok(())
    })
}

/// `T₂` where `χ = 1`.
#[no_mangle]
pub unsafe extern "C" fn ndc_t2_for_pulses(h: *const NdcSpectrum, n_pulses: u32, out: *mut f64) -> NdcStatus {
    guard(|| {
        if n_pulses == 0 {
            return Err(invalid("n_pulses must be >= 1"));
        }
        let v = filterfn::t2_for_pulses(spectrum(h)?, n_pulses).ffi()?;
        *output(out, "out")? = v;
        Ok(())
    })
}

/// `T₂` for each of `len` pulse numbers, written to `out_t2[0..len]`.
#[no_mangle]
pub unsafe extern "C" fn ndc_predict_t2_curve(
    h: *const NdcSpectrum,
    n_pulses: *const u32,
    len: usize,
    out_t2: *mut f64,
) -> NdcStatus {
    guard(|| {
        let s = spectrum(h)?;
        let ns = input(n_pulses, len, "n_pulses")?;
        if len > 0 && out_t2.is_null() {
            return Err(null("out_t2"));
        }
        let curve = filterfn::predict_t2_curve(s, ns).ffi()?;
        let out = slice::from_raw_parts_mut(out_t2, len);
        for (o, (_, t2)) in out.iter_mut().zip(curve) {
            *o = t2;
        }
        Ok(())
    })
}

// Fitters.

/// Result of [`ndc_fit_stretched_exp`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NdcStretchedFit {
    pub amplitude: f64,
    pub t2: f64,
    pub stretch: f64,
    pub t0: f64,
    pub residual_norm: f64,
}

/// Fits `c(t) = a·exp(−((t − N t_π)/T₂)ⁿ)` to `len` samples.
#[no_mangle]
pub unsafe extern "C" fn ndc_fit_stretched_exp(
    t: *const f64,
    c: *const f64,
    len: usize,
    n_pulses: u32,
    t_pi: f64,
    out: *mut NdcStretchedFit,
) -> NdcStatus {
    guard(|| {
        let t = input(t, len, "t")?;
        let c = input(c, len, "c")?;
        let out = output(out, "out")?;
        let trace = CoherenceTrace::new(n_pulses, t_pi, t.iter().copied().zip(c.iter().copied()).collect()).ffi()?;
        let f = fitkit::fit_stretched_exp(&trace).ffi()?;
        *out = NdcStretchedFit {
            amplitude: f.amplitude,
            t2: f.t2,
            stretch: f.stretch,
            t0: f.t0,
            residual_norm: f.residual_norm,
        };
        Ok(())
    })
}

/// Fits `T₂(N) = T₂,echo·N^k` to `len` points.
#[no_mangle]
pub unsafe extern "C" fn ndc_fit_power_law(
    n_pulses: *const u32,
    t2: *const f64,
    len: usize,
    out_t2_echo: *mut f64,
    out_k: *mut f64,
) -> NdcStatus {
    guard(|| {
        let ns = input(n_pulses, len, "n_pulses")?;
        let t2 = input(t2, len, "t2")?;
        let (o_t2, o_k) = (output(out_t2_echo, "out_t2_echo")?, output(out_k, "out_k")?);
        let pts: Vec<(u32, f64)> = ns.iter().copied().zip(t2.iter().copied()).collect();
        let f = fitkit::fit_power_law(&pts).ffi()?;
        *o_t2 = f.t2_echo;
        *o_k = f.k;
        Ok(())
    })
}

/// Fraction of NV⁰ in `measured = a·nv0 + (1 − a)·nvm` (each normalized to
/// unit sum), clipped to `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn ndc_unmix_pl(
    measured: *const f64,
    ref_nv0: *const f64,
    ref_nvm: *const f64,
    len: usize,
    out_nv0_fraction: *mut f64,
) -> NdcStatus {
    guard(|| {
        let m = input(measured, len, "measured")?;
        let a = input(ref_nv0, len, "ref_nv0")?;
        let b = input(ref_nvm, len, "ref_nvm")?;
        let out = output(out_nv0_fraction, "out_nv0_fraction")?;
        *out = fitkit::unmix_pl(m, a, b).ffi()?.nv0_fraction;
        Ok(())
    })
}

/// DEER signals from the four photon counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NdcDeerSignals {
    pub s_d: f64,
    pub s_e: f64,
    pub s_fid: f64,
}

#[no_mangle]
pub unsafe extern "C" fn ndc_deer_signals(f1: f64, f2: f64, f3: f64, f4: f64, out: *mut NdcDeerSignals) -> NdcStatus {
    guard(|| {
        let out = output(out, "out")?;
        let d = fitkit::deer_signals(f1, f2, f3, f4).ffi()?;
        *out = NdcDeerSignals {
            s_d: d.s_d,
            s_e: d.s_e,
            s_fid: d.s_fid,
        };
        Ok(())
    })
}

// Band bending.

/// Opaque solved band-bending profile.
pub struct NdcBandProfile(BandProfile);

/// Depletion summary of a solved profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NdcDepletionReport {
    /// Depth below the surface where neutral P1 falls below half its bulk
    /// value, nm.
    pub width_nm: f64,
    /// Fractional loss of neutral P1 over the whole core.
    pub p1_reduction: f64,
    /// Relative change of the NV⁻ count.
    pub nv_change: f64,
    /// Relative Gauss's-law mismatch of the solution.
    pub gauss_closure: f64,
}

/// Solves Poisson's equation for a preset (`"flat"`, `"bare"` or
/// `"core-shell"`). A finite `surface_bending` (eV) overrides the preset's
/// value; pass NaN to keep it.
#[no_mangle]
pub unsafe extern "C" fn ndc_bandbend_solve(
    preset: *const c_char,
    surface_bending: f64,
    out: *mut *mut NdcBandProfile,
) -> NdcStatus {
    guard(|| {
        if preset.is_null() {
            return Err(null("preset"));
        }
        let out = output(out, "out")?;
        let name = CStr::from_ptr(preset)
            .to_str()
            .map_err(|_| invalid("preset is not valid UTF-8"))?;
        let mut cfg = BandConfig::preset(name).ffi()?;
        if !surface_bending.is_nan() {
            cfg = cfg.with_surface_bending(surface_bending);
        }
        let profile = bandbend::solve_poisson(&cfg).ffi()?;
        *out = Box::into_raw(Box::new(NdcBandProfile(profile)));
        Ok(())
    })
}

/// Releases a profile. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ndc_band_profile_free(h: *mut NdcBandProfile) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of radial nodes; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ndc_band_profile_len(h: *const NdcBandProfile) -> usize {
    h.as_ref().map_or(0, |p| p.0.r.len())
}

/// Copies radius (nm) and band bending (eV) into arrays of length `len`,
/// which must be at least [`ndc_band_profile_len`].
#[no_mangle]
pub unsafe extern "C" fn ndc_band_profile_copy(
    h: *const NdcBandProfile,
    r_nm: *mut f64,
    phi_ev: *mut f64,
    len: usize,
) -> NdcStatus {
    guard(|| {
        let p = &h.as_ref().ok_or_else(|| null("profile handle"))?.0;
        let n = p.r.len();
        if len < n {
            return Err(invalid(format!("buffers hold {len} values, profile has {n}")));
        }
        if r_nm.is_null() || phi_ev.is_null() {
            return Err(null("output buffer"));
        }
        slice::from_raw_parts_mut(r_nm, n).copy_from_slice(&p.r);
        slice::from_raw_parts_mut(phi_ev, n).copy_from_slice(&p.phi);
        Ok(())
    })
}

/// P1 depletion at the default threshold plus NV⁻ stability.
#[no_mangle]
pub unsafe extern "C" fn ndc_band_profile_report(h: *const NdcBandProfile, out: *mut NdcDepletionReport) -> NdcStatus {
    guard(|| {
        let p = &h.as_ref().ok_or_else(|| null("profile handle"))?.0;
        let out = output(out, "out")?;
        let rep = bandbend::p1_depletion_report(p, "P1", bandbend::DEFAULT_DEPLETION_THRESHOLD).ffi()?;
        let nv = bandbend::nv_stability_report(p).ffi()?;
        *out = NdcDepletionReport {
            width_nm: rep.width_nm,
            p1_reduction: rep.reduction,
            nv_change: nv,
            gauss_closure: p.gauss_closure,
        };
        Ok(())
    })
}
