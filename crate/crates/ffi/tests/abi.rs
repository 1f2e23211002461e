use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use nanodecoh_ffi::*;

fn last_error() -> String {
    let n = unsafe { ndc_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { ndc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn chi_and_t2_round_trip_through_handles() {
    unsafe {
        let s = ndc_spectrum_core_shell();
        let mut t2 = 0.0;
        assert_eq!(ndc_t2_for_pulses(s, 64, &mut t2), NdcStatus::NdcOk);
        let mut chi = 0.0;
        assert_eq!(ndc_chi_exact(s, 64, t2, &mut chi), NdcStatus::NdcOk);
        assert!((chi - 1.0).abs() < 1e-5, "chi(T2) = {chi}");
        let mut approx = 0.0;
        assert_eq!(ndc_chi_delta(s, 64, t2, &mut approx), NdcStatus::NdcOk);
        assert!(approx > 0.0);

        let ns = [1u32, 4, 16, 64];
        let mut curve = [0.0; 4];
        assert_eq!(ndc_predict_t2_curve(s, ns.as_ptr(), 4, curve.as_mut_ptr()), NdcStatus::NdcOk);
        assert!((curve[3] / t2 - 1.0).abs() < 1e-9);
        let (mut t2e, mut k) = (0.0, 0.0);
        assert_eq!(ndc_fit_power_law(ns.as_ptr(), curve.as_ptr(), 4, &mut t2e, &mut k), NdcStatus::NdcOk);
        assert!(k > 0.3 && k < 0.8, "k = {k}");
        ndc_spectrum_free(s);
    }
}

#[test]
fn built_spectrum_matches_closed_form() {
    unsafe {
        let s = ndc_spectrum_new();
        assert_eq!(ndc_spectrum_add_lorentzian(s, 1e6, 1e-6), NdcStatus::NdcOk);
        assert_eq!(ndc_spectrum_set_white_floor(s, 10.0), NdcStatus::NdcOk);
        let mut v = 0.0;
        assert_eq!(ndc_spectrum_density(s, 1e6, &mut v), NdcStatus::NdcOk);
        let want = 1e12 * 1e-6 / (std::f64::consts::PI * 2.0) + 10.0;
        assert!((v / want - 1.0).abs() < 1e-12);
        assert_eq!(ndc_spectrum_set_one_over_f(s, 1e16, 3.5), NdcStatus::NdcErrInvalidArgument);
        assert!(!last_error().is_empty());
        ndc_spectrum_free(s);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    unsafe {
        ndc_clear_error();
        assert_eq!(ndc_last_error_message(ptr::null_mut(), 0), 0);
        let mut out = 0.0;
        assert_eq!(ndc_chi_exact(ptr::null(), 1, 1e-6, &mut out), NdcStatus::NdcErrNullPointer);
        assert!(last_error().contains("spectrum handle"));
        let s = ndc_spectrum_bare();
        assert_eq!(ndc_spectrum_density(s, -1.0, &mut out), NdcStatus::NdcErrDomain);
        assert_eq!(ndc_chi_exact(s, 0, 1e-6, &mut out), NdcStatus::NdcErrInvalidArgument);
        assert_eq!(ndc_chi_exact(s, 1, 1e-6, ptr::null_mut()), NdcStatus::NdcErrNullPointer);
        ndc_spectrum_free(s);
        ndc_spectrum_free(ptr::null_mut());

        // Truncation keeps the terminator.
        let mut small = [1 as c_char; 4];
        let full = ndc_last_error_message(small.as_mut_ptr(), small.len());
        assert!(full > 3);
        assert_eq!(small[3], 0);
    }
}

#[test]
fn fitters_invert_their_models() {
    unsafe {
        let t: Vec<f64> = (1..=30).map(|i| i as f64 * 1e-6).collect();
        let c: Vec<f64> = t.iter().map(|&x| 0.9 * (-(x / 12e-6).powf(1.4)).exp()).collect();
        let mut fit = NdcStretchedFit::default();
        assert_eq!(
            ndc_fit_stretched_exp(t.as_ptr(), c.as_ptr(), t.len(), 1, 0.0, &mut fit),
            NdcStatus::NdcOk
        );
        assert!((fit.t2 / 12e-6 - 1.0).abs() < 1e-6 && (fit.stretch - 1.4).abs() < 1e-6);

        let nv0 = [0.1, 0.5, 0.3, 0.1];
        let nvm = [0.0, 0.2, 0.4, 0.4];
        let mixed: Vec<f64> = nv0.iter().zip(&nvm).map(|(a, b)| 0.71 * a + 0.29 * b).collect();
        let mut frac = 0.0;
        assert_eq!(ndc_unmix_pl(mixed.as_ptr(), nv0.as_ptr(), nvm.as_ptr(), 4, &mut frac), NdcStatus::NdcOk);
        assert!((frac - 0.71).abs() < 1e-12);

        let mut d = NdcDeerSignals::default();
        assert_eq!(ndc_deer_signals(3.0, 1.0, 6.0, 2.0, &mut d), NdcStatus::NdcOk);
        assert!((d.s_fid - 1.0).abs() < 1e-15);
        assert_eq!(ndc_deer_signals(1.0, 1.0, 2.0, 2.0, &mut d), NdcStatus::NdcErrDomain);
    }
}

#[test]
fn band_profile_handle_exposes_solution() {
    unsafe {
        let name = CString::new("core-shell").unwrap();
        let mut h: *mut NdcBandProfile = ptr::null_mut();
        assert_eq!(ndc_bandbend_solve(name.as_ptr(), f64::NAN, &mut h), NdcStatus::NdcOk);
        let n = ndc_band_profile_len(h);
        assert!(n >= 200);
        let (mut r, mut phi) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(ndc_band_profile_copy(h, r.as_mut_ptr(), phi.as_mut_ptr(), n), NdcStatus::NdcOk);
        assert!((phi[n - 1] - 0.225).abs() < 1e-9);
        assert_eq!(
            ndc_band_profile_copy(h, r.as_mut_ptr(), phi.as_mut_ptr(), n - 1),
            NdcStatus::NdcErrInvalidArgument
        );
        let mut rep = NdcDepletionReport::default();
        assert_eq!(ndc_band_profile_report(h, &mut rep), NdcStatus::NdcOk);
        assert!(rep.width_nm > 0.0 && rep.p1_reduction > 0.0 && rep.gauss_closure < 1e-3);
        ndc_band_profile_free(h);

        let bad = CString::new("nope").unwrap();
        let mut h2: *mut NdcBandProfile = ptr::null_mut();
        assert_ne!(ndc_bandbend_solve(bad.as_ptr(), 0.0, &mut h2), NdcStatus::NdcOk);
        assert!(h2.is_null());
    }
}

#[test]
fn version_and_kappa() {
    let v = unsafe { CStr::from_ptr(ndc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert!((ndc_kappa() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    assert_eq!(ndc_filter_fn(1.0, 0), 0.0);
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "nanodecoh.h"

int main(void) {
    NdcSpectrum *s = ndc_spectrum_core_shell();
    double t2 = 0.0, chi = 0.0;
    if (ndc_t2_for_pulses(s, 16, &t2) != NDC_OK) return 1;
    if (ndc_chi_exact(s, 16, t2, &chi) != NDC_OK) return 2;
    ndc_spectrum_free(s);
    if (fabs(chi - 1.0) > 1e-5) return 3;
    if (ndc_chi_exact(NULL, 1, 1.0, &chi) != NDC_ERR_NULL_POINTER) return 4;
    char buf[128];
    if (ndc_last_error_message(buf, sizeof buf) == 0) return 5;
    printf("ok %s\n", ndc_version());
    return 0;
}
"#;

/// Compiles a C program against the generated header, and links and runs it
/// when the static library is present next to this test binary.
#[test]
fn header_compiles_and_links_from_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let syntax = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output();
    let Ok(syntax) = syntax else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(syntax.status.success(), "{}", String::from_utf8_lossy(&syntax.stderr));

    // target/<profile>/deps/abi-* -> target/<profile>/libnanodecoh_ffi.a
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(Path::parent).unwrap().join("libnanodecoh_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping link step", lib.display());
        return;
    }
    let bin = dir.path().join("smoke");
    let link = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(link.status.success(), "{}", String::from_utf8_lossy(&link.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
