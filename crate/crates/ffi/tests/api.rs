use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gbsm_ffi::*;

fn scenario_path(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = gbsm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut GbsmScenario {
    let mut h = ptr::null_mut();
    let status = unsafe { gbsm_scenario_load(scenario_path(name).as_ptr(), &mut h) };
    assert_eq!(status, GbsmStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gbsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_dims_and_free() {
    let h = load("receding.toml");
    let (mut u, mut s) = (0usize, 0usize);
    assert_eq!(unsafe { gbsm_scenario_dims(h, &mut u, &mut s) }, GbsmStatus::Ok);
    assert_eq!((u, s), (2, 2));
    unsafe { gbsm_scenario_free(h) };
    unsafe { gbsm_scenario_free(ptr::null_mut()) };
}

#[test]
fn missing_file_reports_io_error() {
    let mut h = ptr::null_mut();
    let path = CString::new("/nonexistent/gbsm.toml").unwrap();
    let status = unsafe { gbsm_scenario_load(path.as_ptr(), &mut h) };
    assert_eq!(status, GbsmStatus::Io);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    gbsm_clear_last_error();
    assert!(gbsm_last_error_message().is_null());
}

#[test]
fn parse_errors_name_the_field() {
    let text = std::fs::read_to_string(scenario_path("receding.toml").to_str().unwrap())
        .unwrap()
        .replacen("kappa = 10.0", "kappa = -2.0", 1);
    let c = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    let status = unsafe { gbsm_scenario_parse(c.as_ptr(), &mut h) };
    assert_eq!(status, GbsmStatus::InvalidArgument);
    assert!(last_error().contains("kappa"), "{}", last_error());

    let garbage = CString::new("this is = = not toml").unwrap();
    assert_eq!(unsafe { gbsm_scenario_parse(garbage.as_ptr(), &mut h) }, GbsmStatus::Parse);
}

#[test]
fn null_arguments_are_rejected() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { gbsm_scenario_load(ptr::null(), &mut h) }, GbsmStatus::NullPointer);
    let path = scenario_path("receding.toml");
    assert_eq!(
        unsafe { gbsm_scenario_load(path.as_ptr(), ptr::null_mut()) },
        GbsmStatus::NullPointer
    );
    let mut out = 0.0;
    let vv = CString::new("VV").unwrap();
    assert_eq!(
        unsafe { gbsm_mean_correlation(ptr::null(), vv.as_ptr(), 0.0, &mut out) },
        GbsmStatus::NullPointer
    );
}

#[test]
fn correlation_matrix_is_hermitian_with_unit_diagonal() {
    let h = load("receding.toml");
    let vv = CString::new("VV").unwrap();
    let mut small = [0.0; 8];
    assert_eq!(
        unsafe { gbsm_correlation_matrix(h, vv.as_ptr(), 1.0, small.as_mut_ptr(), small.len()) },
        GbsmStatus::BufferTooSmall
    );
    let mut buf = [0.0; 32];
    assert_eq!(
        unsafe { gbsm_correlation_matrix(h, vv.as_ptr(), 1.0, buf.as_mut_ptr(), buf.len()) },
        GbsmStatus::Ok
    );
    let at = |i: usize, j: usize| (buf[2 * (i * 4 + j)], buf[2 * (i * 4 + j) + 1]);
    for i in 0..4 {
        assert!((at(i, i).0 - 1.0).abs() < 1e-9 && at(i, i).1.abs() < 1e-9);
        for j in 0..4 {
            assert!((at(i, j).0 - at(j, i).0).abs() < 1e-12);
            assert!((at(i, j).1 + at(j, i).1).abs() < 1e-12);
        }
    }
    let mut mean = 0.0;
    assert_eq!(unsafe { gbsm_mean_correlation(h, vv.as_ptr(), 1.0, &mut mean) }, GbsmStatus::Ok);
    let upper: f64 = (0..4)
        .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
        .map(|(i, j)| at(i, j).0.hypot(at(i, j).1))
        .sum();
    assert!((mean - upper / 6.0).abs() < 1e-12);
    unsafe { gbsm_scenario_free(h) };
}

#[test]
fn unknown_polarization_is_invalid() {
    let h = load("receding.toml");
    let label = CString::new("XX").unwrap();
    let mut out = 0.0;
    assert_eq!(
        unsafe { gbsm_mean_correlation(h, label.as_ptr(), 0.0, &mut out) },
        GbsmStatus::InvalidArgument
    );
    unsafe { gbsm_scenario_free(h) };
}

#[test]
fn times_past_the_horizon_are_out_of_range() {
    let h = load("brownian.toml");
    let vv = CString::new("VV").unwrap();
    let mut out = 0.0;
    assert_eq!(
        unsafe { gbsm_mean_correlation(h, vv.as_ptr(), 1e3, &mut out) },
        GbsmStatus::OutOfRange
    );
    assert!(last_error().contains("horizon"));
    unsafe { gbsm_scenario_free(h) };
}

#[test]
fn capacity_is_seeded_and_grows_with_snr() {
    let h = load("receding.toml");
    let vh = CString::new("VH").unwrap();
    let run = |snr: f64| {
        let (mut mean, mut se) = (0.0, 0.0);
        let status = unsafe { gbsm_ergodic_capacity(h, vh.as_ptr(), 2.0, snr, 2000, &mut mean, &mut se) };
        assert_eq!(status, GbsmStatus::Ok);
        (mean, se)
    };
    let (a, se) = run(10.0);
    assert_eq!(run(10.0).0, a);
    assert!(se > 0.0 && se < 0.1);
    assert!(run(20.0).0 > a);
    assert_eq!(unsafe { gbsm_scenario_set_seed(h, 7) }, GbsmStatus::Ok);
    assert_ne!(run(10.0).0, a);
    unsafe { gbsm_scenario_free(h) };
}

#[test]
fn vmf_pdf_matches_closed_form() {
    let (kappa, theta) = (3.0f64, 0.4f64);
    let mut out = 0.0;
    let status = unsafe { gbsm_vmf_pdf(std::f64::consts::FRAC_PI_2 + theta, 0.0, std::f64::consts::FRAC_PI_2, 0.0, kappa, &mut out) };
    assert_eq!(status, GbsmStatus::Ok);
    // Angular distance to the mean is `theta`; the density carries the
    // elevation Jacobian `sin(pi/2 + theta)`.
    let expected = kappa / (4.0 * std::f64::consts::PI * kappa.sinh()) * (kappa * theta.cos()).exp() * theta.cos();
    assert!((out - expected).abs() < 1e-12, "{out} vs {expected}");

    assert_eq!(unsafe { gbsm_vmf_pdf(0.0, 0.0, 0.0, 0.0, -1.0, &mut out) }, GbsmStatus::InvalidArgument);
}

#[test]
fn noise_free_motion_path_hits_anchor() {
    let n = 501;
    let (mut el, mut az) = (vec![0.0; n], vec![0.0; n]);
    let status = unsafe {
        gbsm_motion_path(
            90f64.to_radians(),
            330f64.to_radians(),
            45f64.to_radians(),
            (-45f64).to_radians(),
            0.0,
            0.0,
            500,
            0.01,
            1,
            el.as_mut_ptr(),
            az.as_mut_ptr(),
            n,
        )
    };
    assert_eq!(status, GbsmStatus::Ok);
    assert!((el[100] - 135f64.to_radians()).abs() < 1e-9);
    assert!((az[100] - 285f64.to_radians()).abs() < 1e-9);
    assert!((el[500] - 45f64.to_radians()).abs() < 1e-9);
    assert!((az[500] - 105f64.to_radians()).abs() < 1e-9);

    let status = unsafe {
        gbsm_motion_path(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 500, 0.01, 1, el.as_mut_ptr(), az.as_mut_ptr(), 10)
    };
    assert_eq!(status, GbsmStatus::BufferTooSmall);
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/gbsm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "gbsm_last_error_message",
        "gbsm_scenario_load",
        "gbsm_scenario_parse",
        "gbsm_scenario_free",
        "gbsm_correlation_matrix",
        "gbsm_ergodic_capacity",
        "gbsm_vmf_pdf",
        "gbsm_motion_path",
        "typedef struct GbsmScenario GbsmScenario",
        "GBSM_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"gbsm.h\"\nint main(void) { GbsmScenario *h = 0; return gbsm_scenario_load(\"x\", &h) == GBSM_STATUS_OK; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .expect("a C compiler is available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
