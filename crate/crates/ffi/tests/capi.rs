use std::ffi::{c_char, CString};
use std::ptr;

use korn_shell_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { ks_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn clamped_cylinder_round_trip() {
    unsafe {
        let mut shell = ptr::null_mut();
        assert_eq!(ks_shell_cylinder(1.0, 2.0, 0.2, &mut shell), KsStatus::Ok);
        let mut forms = ptr::null_mut();
        assert_eq!(ks_forms_assemble(shell, 4, 4, 2, 2, 3, &mut forms), KsStatus::Ok);
        let mut dim = 0;
        assert_eq!(ks_forms_dim(forms, &mut dim), KsStatus::Ok);
        assert!(dim > 0);
        let mut summary = KsEigenSummary::default();
        let mut v = vec![0.0; dim];
        assert_eq!(ks_korn_constant(forms, 1e-9, 500, &mut summary, v.as_mut_ptr(), dim), KsStatus::Ok);
        assert!(summary.converged && summary.lambda_min > 0.0 && summary.lambda_min < 1.0);
        assert!(v.iter().any(|&x| x != 0.0));
        // wrong buffer length
        assert_eq!(ks_korn_constant(forms, 1e-9, 500, &mut summary, v.as_mut_ptr(), 3), KsStatus::InvalidArgument);
        ks_forms_free(forms);
        ks_shell_free(shell);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut shell = ptr::null_mut();
        assert_eq!(ks_shell_sphere(-1.0, 0.1, &mut shell), KsStatus::Domain);
        assert!(shell.is_null());
        assert!(last_error().contains("radius"));
        assert_eq!(ks_shell_sphere(1.0, 0.1, ptr::null_mut()), KsStatus::NullPointer);
        assert_eq!(ks_forms_dim(ptr::null(), ptr::null_mut()), KsStatus::NullPointer);
        let (h, k) = ([0.1, 0.05], [1.0, 0.5]);
        let mut fit = KsFit::default();
        assert_eq!(ks_fit_exponent(h.as_ptr(), k.as_ptr(), 2, &mut fit), KsStatus::Data);
        let bad = CString::new("colour = red").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(ks_config_parse(bad.as_ptr(), &mut cfg), KsStatus::Configuration);
        ks_shell_free(ptr::null_mut());
        ks_forms_free(ptr::null_mut());
        ks_config_free(ptr::null_mut());
        ks_report_free(ptr::null_mut());
    }
}

#[test]
fn fit_and_sweep() {
    unsafe {
        let h = [0.1, 0.05, 0.025];
        let k: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        let mut fit = KsFit::default();
        assert_eq!(ks_fit_exponent(h.as_ptr(), k.as_ptr(), 3, &mut fit), KsStatus::Ok);
        assert!((fit.beta - 1.5).abs() < 1e-12);

        let text = CString::new("shell = cylinder\nh = 0.2, 0.15, 0.1\nsuites = none\nstability = false\n").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(ks_config_parse(text.as_ptr(), &mut cfg), KsStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(ks_run_sweep(cfg, &mut report), KsStatus::Ok);
        let mut n = 0;
        assert_eq!(ks_report_row_count(report, &mut n), KsStatus::Ok);
        assert_eq!(n, 3);
        let mut row = KsRow::default();
        assert_eq!(ks_report_row(report, 2, &mut row), KsStatus::Ok);
        assert!(row.ok && row.h == 0.1 && row.k_eigen > 0.0 && row.k_ansatz.is_nan());
        assert_eq!(ks_report_row(report, 3, &mut row), KsStatus::InvalidArgument);
        assert_eq!(ks_report_fit(report, &mut fit), KsStatus::Ok);
        assert!(fit.beta > 0.0);
        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(ks_report_write(report, d.as_ptr()), KsStatus::Ok);
        assert!(dir.path().join("scaling.csv").exists());
        ks_report_free(report);
        ks_config_free(cfg);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/korn_shell.h")).unwrap();
    for name in [
        "ks_shell_sphere",
        "ks_forms_assemble",
        "ks_korn_constant",
        "ks_run_sweep",
        "ks_last_error_message",
        "typedef struct KsShell KsShell",
        "KS_STATUS_OK",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let version = unsafe { std::ffi::CStr::from_ptr(ks_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", concat!(env!("CARGO_MANIFEST_DIR"), "/include/korn_shell.h")])
        .status()
    else {
        return;
    };
    assert!(status.success());
}
