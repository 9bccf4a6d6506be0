use std::ffi::{c_char, CStr, CString};
use std::ptr;

use phytoagg_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { pa_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn build(g: &str, q: &str, x0: f64, x1: f64, n: usize) -> (PaStatus, *mut PaModel) {
    let (g, w, q) = (c(g), c("0"), c(q));
    let mut m = ptr::null_mut();
    let s = unsafe {
        pa_model_new(
            x0,
            x1,
            g.as_ptr(),
            w.as_ptr(),
            q.as_ptr(),
            ptr::null(),
            n,
            PaGrading::Uniform,
            &mut m,
        )
    };
    (s, m)
}

#[test]
fn closed_form_round_trip() {
    let (s, m) = build("1", "2", 1.0, 2.0, 200);
    assert_eq!(s, PaStatus::Ok);
    let mut xi = 0.0;
    assert_eq!(unsafe { pa_model_xi(m, 0.5, &mut xi) }, PaStatus::Ok);
    let exact = 2.0 * (1.0 - (-0.5f64).exp()) / 0.5 - 1.0;
    assert!((xi - exact).abs() < 1e-10);

    let mut lambda = 0.0;
    let mut has_root = false;
    assert_eq!(
        unsafe { pa_model_spectral_bound(m, &mut lambda, &mut has_root) },
        PaStatus::Ok
    );
    assert!(has_root);
    assert!((lambda - 1.593_624_260_040_04).abs() < 1e-9);

    let mut r = PaReport {
        xi_at_zero: 0.0,
        lambda0: 0.0,
        has_root: false,
        classification: PaClassification::Marginal,
        gamma_x1: 0.0,
    };
    assert_eq!(unsafe { pa_model_classify(m, 1e-9, &mut r) }, PaStatus::Ok);
    assert_eq!(r.classification, PaClassification::Unstable);

    // q/4 gives xi(0) = -1/2
    assert_eq!(
        unsafe { pa_model_set_scales(m, 1.0, 0.25, 1.0) },
        PaStatus::Ok
    );
    assert_eq!(unsafe { pa_model_classify(m, 1e-9, &mut r) }, PaStatus::Ok);
    assert_eq!(r.classification, PaClassification::Stable);
    assert!((r.xi_at_zero + 0.5).abs() < 1e-12);

    // negative multipliers are invalid coefficients
    assert_eq!(
        unsafe { pa_model_set_scales(m, -1.0, 1.0, 1.0) },
        PaStatus::Domain
    );
    unsafe { pa_model_free(m) };
}

#[test]
fn errors_are_reported() {
    let (s, m) = build("1 +", "1", 1.0, 2.0, 50);
    assert_eq!(s, PaStatus::Parse);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let (s, _) = build("1", "1", 2.0, 1.0, 50);
    assert_eq!(s, PaStatus::Domain);

    let (s, _) = build("1", "1", 1.0, 2.0, 1);
    assert_eq!(s, PaStatus::InvalidArgument);

    let mut xi = 0.0;
    assert_eq!(
        unsafe { pa_model_xi(ptr::null(), 0.0, &mut xi) },
        PaStatus::NullPointer
    );
    assert_eq!(last_error(), "model handle is null");

    let q = c("1");
    let mut m = ptr::null_mut();
    let s = unsafe {
        pa_model_new(
            1.0,
            2.0,
            ptr::null(),
            q.as_ptr(),
            q.as_ptr(),
            ptr::null(),
            10,
            PaGrading::Uniform,
            &mut m,
        )
    };
    assert_eq!(s, PaStatus::NullPointer);
    unsafe { pa_model_free(ptr::null_mut()) };
}

#[test]
fn no_root_without_fecundity() {
    let (s, m) = build("1", "0", 1.0, 2.0, 50);
    assert_eq!(s, PaStatus::Ok);
    let mut lambda = 0.0;
    let mut has_root = true;
    assert_eq!(
        unsafe { pa_model_spectral_bound(m, &mut lambda, &mut has_root) },
        PaStatus::Ok
    );
    assert!(!has_root && lambda.is_nan());
    unsafe { pa_model_free(m) };
}

#[test]
fn error_message_truncates() {
    let _ = unsafe { pa_model_xi(ptr::null(), 0.0, ptr::null_mut()) };
    let mut buf = [1 as c_char; 6];
    let full = unsafe { pa_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(full, "model handle is null".len());
    assert_eq!(
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(),
        "model"
    );
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/phytoagg.h");
    for sym in [
        "pa_model_new",
        "pa_model_free",
        "pa_model_set_scales",
        "pa_model_xi",
        "pa_model_spectral_bound",
        "pa_model_classify",
        "pa_last_error_message",
        "pa_version",
    ] {
        assert!(
            header.contains(&format!("{sym}(")),
            "{sym} missing from header"
        );
    }
    let v = unsafe { CStr::from_ptr(pa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
