use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use aitsahalia_ffi::*;

fn model(which: u32) -> *mut AsModel {
    let mut p = std::mem::MaybeUninit::<AsParams>::uninit();
    unsafe {
        assert_eq!(as_params_preset(which, p.as_mut_ptr()), AsStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(as_model_new(p.as_ptr(), &mut m), AsStatus::Ok);
        m
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(as_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn regimes_of_presets() {
    let (a, b) = (model(1), model(2));
    let mut r = AsRegime::Invalid;
    unsafe {
        assert_eq!(as_model_regime(a, &mut r), AsStatus::Ok);
        assert_eq!(r, AsRegime::NonCritical);
        assert_eq!(as_model_regime(b, &mut r), AsStatus::Ok);
        assert_eq!(r, AsRegime::CriticalUnsupported);
        as_model_free(a);
        as_model_free(b);
    }
}

#[test]
fn invalid_params_are_rejected_with_a_message() {
    let mut p = std::mem::MaybeUninit::<AsParams>::uninit();
    unsafe {
        as_params_preset(1, p.as_mut_ptr());
        let mut p = p.assume_init();
        p.x0 = -1.0;
        let mut m = ptr::null_mut();
        assert_eq!(as_model_new(&p, &mut m), AsStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(last_error().contains("x0"), "{}", last_error());
        assert_eq!(as_params_preset(7, &mut p), AsStatus::InvalidArgument);
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(as_bem_step(ptr::null(), 1.0, 0.01, 0.0, 0, &mut out), AsStatus::NullPointer);
        assert_eq!(as_trajectory_len(ptr::null()), 0);
        as_model_free(ptr::null_mut());
        as_trajectory_free(ptr::null_mut());
        as_report_free(ptr::null_mut());
    }
}

#[test]
fn steps_match_the_library() {
    let m = model(1);
    let p = aitsahalia::ModelParams::example1();
    let j = aitsahalia::JumpCoefficient::half();
    let s = aitsahalia::StepInputs::new(0.8, 0.01, 0.05, 1).unwrap();
    let mut out = 0.0;
    unsafe {
        assert_eq!(as_explicit_step(m, AsCorrection::Tamed, 0.0, 0.8, 0.01, 0.05, 1, &mut out), AsStatus::Ok);
        let c = aitsahalia::Correction::tamed(0.01, &p).unwrap();
        assert_eq!(out, aitsahalia::explicit_step(&s, &c, &j).unwrap().value);
        assert_eq!(as_bem_step(m, 0.8, 0.01, 0.05, 1, &mut out), AsStatus::Ok);
        assert_eq!(out, aitsahalia::bem_step(&s, &p, &j).unwrap().value);
        // kappa outside [1/(2r), 1/(2r-2)]
        assert_eq!(
            as_explicit_step(m, AsCorrection::Projected, 1.0, 0.8, 0.01, 0.05, 1, &mut out),
            AsStatus::InvalidArgument
        );
        as_model_free(m);
    }
}

#[test]
fn trajectory_round_trip() {
    let m = model(2);
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(as_simulate(m, AsScheme::Pem, 1.0 / 256.0, 256, 7, 3, &mut t), AsStatus::Ok);
        let n = as_trajectory_len(t);
        assert_eq!(n, 257);
        let mut small = vec![0.0; 10];
        assert_eq!(as_trajectory_values(t, small.as_mut_ptr(), small.len()), AsStatus::BufferTooSmall);
        let mut buf = vec![0.0; n];
        assert_eq!(as_trajectory_values(t, buf.as_mut_ptr(), n), AsStatus::Ok);
        assert!(buf.iter().all(|&y| y > 0.0));
        assert_eq!(buf[0], 1.0);
        as_trajectory_free(t);
        as_model_free(m);
    }
}

#[test]
fn convergence_report_accessors() {
    let m = model(1);
    let hs = [0.125, 0.0625, 0.03125];
    let cfg = AsExperiment {
        horizon: 1.0,
        h_exact: 2f64.powi(-9),
        h_list: hs.as_ptr(),
        h_count: hs.len(),
        n_paths: 64,
        seed: 5,
        scheme_mask: (1 << AsScheme::Tem as u32) | (1 << AsScheme::Bem as u32),
    };
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(as_convergence(m, &cfg, 1, &mut r), AsStatus::Ok);
        assert_eq!(as_report_scheme_count(r), 2);
        assert_eq!(as_report_level_count(r), 3);
        let (mut s, mut q, mut resid) = (AsScheme::Pem, 0.0, 0.0);
        assert_eq!(as_report_rate(r, 1, &mut s, &mut q, &mut resid), AsStatus::Ok);
        assert_eq!(s, AsScheme::Bem);
        assert!(q.is_finite() && resid >= 0.0);
        let (mut h, mut e, mut se) = (0.0, 0.0, 0.0);
        assert_eq!(as_report_error(r, 0, 2, &mut h, &mut e, &mut se), AsStatus::Ok);
        assert_eq!(h, 0.03125);
        assert!(e > 0.0 && se >= 0.0);
        assert_eq!(as_report_error(r, 0, 3, &mut h, &mut e, &mut se), AsStatus::InvalidArgument);
        as_report_free(r);

        let bad = AsExperiment { h_exact: 0.3, ..cfg };
        assert_eq!(as_convergence(m, &bad, 1, &mut r), AsStatus::InvalidArgument);
        as_model_free(m);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(as_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a small C program against the generated header and
/// the static library.
#[test]
fn c_program_links_against_the_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("aitsahalia.h").exists());
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libaitsahalia_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "aitsahalia.h"
int main(void) {
    AsParams p;
    AsModel *m = NULL;
    AsTrajectory *t = NULL;
    double y = 0.0;
    if (as_params_preset(1, &p) != AS_STATUS_OK) return 1;
    if (as_model_new(&p, &m) != AS_STATUS_OK) return 2;
    if (as_explicit_step(m, AS_CORRECTION_TAMED, 0.0, 1.0, 64.0, -500.0, 0, &y) != AS_STATUS_OK) return 3;
    if (!(y > 0.0)) return 4;
    if (as_simulate(m, AS_SCHEME_TEM, 1.0 / 64, 64, 1, 0, &t) != AS_STATUS_OK) return 5;
    if (as_trajectory_len(t) != 65) return 6;
    p.r = 0.5;
    AsModel *bad = NULL;
    if (as_model_new(&p, &bad) != AS_STATUS_INVALID_ARGUMENT) return 7;
    printf("%s\n", as_last_error_message());
    as_trajectory_free(t);
    as_model_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    if !lib.exists() {
        // header-only check when the static library is not in this profile dir
        let st = Command::new(&cc)
            .args(["-fsyntax-only", "-I"])
            .arg(&header_dir)
            .arg(&src)
            .status()
            .unwrap();
        assert!(st.success());
        return;
    }
    let bin = dir.path().join("smoke");
    let st = Command::new(&cc)
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("`r`"));
}
