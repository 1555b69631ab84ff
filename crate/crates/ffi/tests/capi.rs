use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use ctls_ffi::*;

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut CtlsMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { ctls_matrix_new(rows, cols, data.as_ptr(), &mut m) },
        CtlsStatus::Ok
    );
    m
}

fn contents(m: *const CtlsMatrix) -> (usize, usize, Vec<f64>) {
    unsafe {
        let (r, c) = (ctls_matrix_rows(m), ctls_matrix_cols(m));
        let mut buf = vec![0.0; r * c];
        assert_eq!(ctls_matrix_copy(m, buf.as_mut_ptr(), buf.len()), CtlsStatus::Ok);
        (r, c, buf)
    }
}

fn last_error() -> String {
    let p = ctls_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn matrix_round_trip() {
    let m = matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(contents(m), (2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let mut short = [0.0; 5];
    assert_eq!(
        unsafe { ctls_matrix_copy(m, short.as_mut_ptr(), short.len()) },
        CtlsStatus::DimensionMismatch
    );
    unsafe { ctls_matrix_free(m) };
}

#[test]
fn invalid_matrices_are_rejected() {
    let mut m = ptr::null_mut();
    let data = [1.0, f64::NAN];
    assert_eq!(
        unsafe { ctls_matrix_new(1, 2, data.as_ptr(), &mut m) },
        CtlsStatus::NonFinite
    );
    assert!(m.is_null());
    assert!(last_error().contains("NonFinite"));
    assert_eq!(
        unsafe { ctls_matrix_new(0, 2, data.as_ptr(), &mut m) },
        CtlsStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { ctls_matrix_new(1, 2, ptr::null(), &mut m) },
        CtlsStatus::NullPointer
    );
    assert_eq!(
        unsafe { ctls_matrix_new(1, 2, data.as_ptr(), ptr::null_mut()) },
        CtlsStatus::NullPointer
    );
    assert_eq!(unsafe { ctls_matrix_rows(ptr::null()) }, 0);
    unsafe { ctls_matrix_free(ptr::null_mut()) };
}

#[test]
fn simulate_and_estimate_without_noise() {
    let (mut a, mut b, mut x) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    let status = unsafe { ctls_simulate(4, 2, 1, 2, 50, 0.0, 11, &mut a, &mut b, &mut x) };
    assert_eq!(status, CtlsStatus::Ok);
    for method in [CtlsMethod::CtlsRowcol, CtlsMethod::Projection] {
        let mut e = ptr::null_mut();
        assert_eq!(
            unsafe { ctls_estimate(a, b, 1, 2, method, CtlsMu::Mean, &mut e) },
            CtlsStatus::Ok
        );
        let mut xh = ptr::null_mut();
        assert_eq!(unsafe { ctls_estimate_x_hat(e, &mut xh) }, CtlsStatus::Ok);
        let (r, c, got) = contents(xh);
        let (_, _, want) = contents(x);
        assert_eq!((r, c), (4, 2));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
        let mut s2 = f64::NAN;
        assert_eq!(unsafe { ctls_estimate_sigma2(e, &mut s2) }, CtlsStatus::Ok);
        assert!(s2.abs() < 1e-12);
        assert_eq!(unsafe { ctls_estimate_eig_count(e) }, 2);
        let mut eigs = [0.0; 2];
        assert_eq!(unsafe { ctls_estimate_eigs(e, eigs.as_mut_ptr(), 2) }, CtlsStatus::Ok);
        assert!(eigs[0] <= eigs[1]);
        let mut mu = f64::NAN;
        let st = unsafe { ctls_estimate_mu(e, &mut mu) };
        if method == CtlsMethod::Projection {
            assert_eq!(st, CtlsStatus::Ok);
        } else {
            assert_eq!(st, CtlsStatus::Unavailable);
        }
        unsafe {
            ctls_matrix_free(xh);
            ctls_estimate_free(e);
        }
    }
    unsafe {
        ctls_matrix_free(a);
        ctls_matrix_free(b);
        ctls_matrix_free(x);
    }
}

#[test]
fn simulate_is_deterministic() {
    let run = || {
        let (mut a, mut b, mut x) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            unsafe { ctls_simulate(3, 1, 0, 1, 20, 0.1, 5, &mut a, &mut b, &mut x) },
            CtlsStatus::Ok
        );
        let out = (contents(a), contents(b), contents(x));
        unsafe {
            ctls_matrix_free(a);
            ctls_matrix_free(b);
            ctls_matrix_free(x);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn estimator_errors_map_to_status_codes() {
    let a_rows: Vec<f64> = (0..8)
        .flat_map(|i| [i as f64, i as f64, ((i * 3) % 5) as f64])
        .collect();
    let a = matrix(8, 3, &a_rows);
    let b = matrix(8, 1, &[1.0, 0.0, 2.0, 1.0, 3.0, 0.5, 1.5, 2.0]);
    let mut e = ptr::null_mut();
    let st = unsafe { ctls_estimate(a, b, 0, 2, CtlsMethod::CtlsColumns, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::RankDeficientFixedColumns);
    assert!(e.is_null());
    assert!(last_error().contains("RankDeficientFixedColumns"));

    let st = unsafe { ctls_estimate(a, b, 3, 0, CtlsMethod::CtlsRows, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::InvalidPartition);
    let st = unsafe { ctls_estimate(ptr::null(), b, 0, 0, CtlsMethod::Tls, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::NullPointer);

    let short = matrix(7, 1, &[0.0; 7]);
    let st = unsafe { ctls_estimate(a, short, 0, 0, CtlsMethod::Tls, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::DimensionMismatch);

    // Duplicate columns put a null vector of [A B] outside the B block.
    let st = unsafe { ctls_estimate(a, b, 0, 0, CtlsMethod::Tls, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::LowerBlockSingular);

    // A successful call clears the message.
    let st = unsafe { ctls_estimate(a, b, 0, 1, CtlsMethod::CtlsColumns, CtlsMu::Mean, &mut e) };
    assert_eq!(st, CtlsStatus::Ok, "{}", last_error());
    assert!(ctls_last_error_message().is_null());
    unsafe {
        ctls_estimate_free(e);
        ctls_matrix_free(a);
        ctls_matrix_free(b);
        ctls_matrix_free(short);
    }
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(ctls_status_name(CtlsStatus::LowerBlockSingular)) };
    assert_eq!(name.to_str().unwrap(), "LowerBlockSingular");
    let v = unsafe { CStr::from_ptr(ctls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include "ctls.h"

int use_api(void) {
    double data[4] = {1.0, 2.0, 3.0, 4.0};
    CtlsMatrix *m = NULL, *a = NULL, *b = NULL, *x = NULL, *xh = NULL;
    CtlsEstimate *e = NULL;
    double s2 = 0.0, mu = 0.0, eigs[1];
    CtlsStatus st = ctls_matrix_new(2, 2, data, &m);
    ctls_matrix_free(m);
    st = ctls_simulate(2, 1, 0, 0, 10, 0.1, 1, &a, &b, &x);
    st = ctls_estimate(a, b, 0, 0, CTLS_METHOD_TLS, CTLS_MU_MEAN, &e);
    if (st != CTLS_STATUS_OK) {
        return (int)ctls_last_error_message()[0];
    }
    st = ctls_estimate_x_hat(e, &xh);
    st = ctls_estimate_sigma2(e, &s2);
    st = ctls_estimate_mu(e, &mu);
    st = ctls_estimate_eigs(e, eigs, ctls_estimate_eig_count(e));
    st = ctls_matrix_copy(xh, data, ctls_matrix_rows(xh) * ctls_matrix_cols(xh));
    ctls_estimate_free(e);
    ctls_matrix_free(a);
    ctls_matrix_free(b);
    ctls_matrix_free(x);
    ctls_matrix_free(xh);
    return st == CTLS_STATUS_OK && ctls_status_name(st) != NULL && ctls_version() != NULL;
}
"#;

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("ctls.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_api.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler found; skipping");
            return;
        }
    };
    assert!(status.success());
}
