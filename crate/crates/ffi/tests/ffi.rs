// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dwcav_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dwcav_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn representative() -> *mut DwcavParams {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { dwcav_params_representative(1.0, &mut p) },
        DwcavStatus::Ok
    );
    p
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(dwcav_version()) }.to_str().unwrap();
    assert_eq!(v, dwcav::VERSION);
}

#[test]
fn invalid_param_reports_field() {
    let mut p = ptr::null_mut();
    let s = unsafe { dwcav_params_new_two_walls(1.0, 1.0, 0.1, -2.0, 0.1, &mut p) };
    assert_eq!(s, DwcavStatus::InvalidParam);
    assert!(p.is_null());
    assert!(last_error().contains("kappa_a"));
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0.0;
    assert_eq!(
        unsafe { dwcav_bifurcation_amplitude(ptr::null(), -1.0, &mut out) },
        DwcavStatus::NullPointer
    );
    let p = representative();
    assert_eq!(
        unsafe { dwcav_bifurcation_amplitude(p, -1e9, ptr::null_mut()) },
        DwcavStatus::NullPointer
    );
    unsafe { dwcav_params_free(p) };
}

#[test]
fn point_matches_library() {
    let p = representative();
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { dwcav_analyze_point(p, 0.3, -1e9, &mut r) },
        DwcavStatus::Ok
    );
    let q = dwcav::SystemParams::representative(1.0);
    let direct =
        dwcav::entanglement::analyze_point(dwcav::ReducedCoords::from_geff(0.3, -1e9, &q), &q)
            .unwrap();
    for (pair, want) in direct.e().iter().enumerate() {
        let mut e = f64::NAN;
        assert_eq!(
            unsafe { dwcav_result_log_negativity(r, pair as u32, &mut e) },
            DwcavStatus::Ok
        );
        assert_eq!(e.to_bits(), want.to_bits());
    }
    let (mut nr, mut ns) = (0usize, 0usize);
    assert_eq!(
        unsafe { dwcav_result_root_counts(r, &mut nr, &mut ns) },
        DwcavStatus::Ok
    );
    assert_eq!((nr, ns), (direct.n_real_roots, direct.stable_roots.len()));
    let mut e = 0.0;
    assert_eq!(
        unsafe { dwcav_result_log_negativity(r, 3, &mut e) },
        DwcavStatus::InvalidParam
    );

    let mut js = ptr::null_mut();
    assert_eq!(unsafe { dwcav_result_to_json(r, &mut js) }, DwcavStatus::Ok);
    let text = unsafe { CStr::from_ptr(js) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_real_roots"], direct.n_real_roots);
    unsafe {
        dwcav_string_free(js);
        dwcav_result_free(r);
        dwcav_params_free(p);
    }
}

#[test]
fn mean_field_buffer_contract() {
    let p = representative();
    // inside the three-root region: Δ_a < 0 and strong drive
    let q = dwcav::SystemParams::representative(1.0);
    let rr =
        dwcav::steadystate::roots_from_reduced(dwcav::ReducedCoords::from_geff(0.5, -1e9, &q), &q)
            .unwrap();
    assert_eq!(
        unsafe { dwcav_params_set_drive(p, rr.delta_a, rr.xi) },
        DwcavStatus::Ok
    );
    let mut buf = [0.0; 3];
    let mut n = 0usize;
    assert_eq!(
        unsafe { dwcav_mean_field(p, buf.as_mut_ptr(), 1, &mut n) },
        DwcavStatus::BufferTooSmall
    );
    assert_eq!(n, 3);
    assert_eq!(
        unsafe { dwcav_mean_field(p, buf.as_mut_ptr(), 3, &mut n) },
        DwcavStatus::Ok
    );
    assert!(buf[0] < buf[1] && buf[1] < buf[2]);
    for r in &rr.roots {
        assert!(
            buf.iter().any(|&b| (b / r.n_bar - 1.0).abs() < 1e-8),
            "{} {buf:?}",
            r.n_bar
        );
    }
    unsafe { dwcav_params_free(p) };
}

#[test]
fn two_mode_squeezed_negativity() {
    let r: f64 = 0.5;
    let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
    #[rustfmt::skip]
    let v = [
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ];
    let mut e = 0.0;
    assert_eq!(
        unsafe { dwcav_log_negativity(v.as_ptr(), &mut e) },
        DwcavStatus::Ok
    );
    assert!((e - 2.0 * r).abs() < 1e-12);
    let bad = [0.1f64; 16];
    assert_ne!(
        unsafe { dwcav_log_negativity(bad.as_ptr(), &mut e) },
        DwcavStatus::Ok
    );
}

#[test]
fn params_from_json_and_setters() {
    let js =
        CString::new(r#"{"omega":[1.0,1.0],"g":[0.01,0.01],"kappa":[0.01,0.01],"kappa_a":0.02}"#)
            .unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { dwcav_params_from_json(js.as_ptr(), &mut p) },
        DwcavStatus::Ok
    );
    assert_eq!(
        unsafe { dwcav_params_set_temperature(p, -1.0) },
        DwcavStatus::InvalidParam
    );
    assert_eq!(
        unsafe { dwcav_params_set_convention(p, 7) },
        DwcavStatus::InvalidParam
    );
    assert_eq!(
        unsafe { dwcav_params_set_convention(p, 1) },
        DwcavStatus::Ok
    );
    let mut g = 0.0;
    assert_eq!(
        unsafe { dwcav_bifurcation_amplitude(p, 0.5, &mut g) },
        DwcavStatus::Domain
    );
    unsafe { dwcav_params_free(p) };
    let broken = CString::new("{").unwrap();
    assert_eq!(
        unsafe { dwcav_params_from_json(broken.as_ptr(), &mut p) },
        DwcavStatus::Config
    );
}

#[test]
fn uncoupled_cutoff_is_a_bracket_error() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { dwcav_params_new_two_walls(1e9, 1e9, 0.0, 2e6, 1e6, &mut p) },
        DwcavStatus::Ok
    );
    let mut t = 0.0;
    let s = unsafe { dwcav_cutoff_temperature(p, -40.0, 1e-4, 1e-5, 100.0, &mut t) };
    assert_ne!(s, DwcavStatus::Ok);
    unsafe { dwcav_params_free(p) };
}

#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else { return };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libdwcav_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built; skipping");
        return;
    }
    let out = tempfile_path("c_smoke");
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/c_smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.starts_with(dwcav::VERSION), "{text}");
    assert!(text.contains("kappa_a"), "{text}");
}

fn which_cc() -> Result<String, ()> {
    for c in ["cc", "gcc", "clang"] {
        if Command::new(c).arg("--version").output().is_ok() {
            return Ok(c.to_string());
        }
    }
    Err(())
}

fn tempfile_path(stem: &str) -> PathBuf {
    std::env::temp_dir().join(format!("{stem}-{}", std::process::id()))
}
