use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use modstan_ffi::*;

const MEAN_STDDEV: &str = include_str!("../../core/fixtures/mean_stddev.stan");

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Take ownership of a returned string.
unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    modstan_string_free(p);
    s
}

fn last_error() -> Option<serde_json::Value> {
    let p = modstan_last_error();
    (!p.is_null()).then(|| serde_json::from_str(unsafe { CStr::from_ptr(p) }.to_str().unwrap()).unwrap())
}

fn compiled(src: &str) -> *mut ModstanProgram {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { modstan_compile(c(src).as_ptr(), &mut p) }, ModstanStatus::Ok);
    p
}

#[test]
fn graph_and_count() {
    let p = compiled(MEAN_STDDEV);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(modstan_model_graph(p, 5000, 0, &mut out), ModstanStatus::Ok);
        let g: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(g["nodes"].as_array().unwrap().len(), 6);
        assert_eq!(g["edges"].as_array().unwrap().len(), 9);

        assert_eq!(modstan_model_graph(p, 3, 1, &mut out), ModstanStatus::TooLarge);
        assert_eq!(last_error().unwrap()["code"], "CAP_EXCEEDED");

        assert_eq!(modstan_model_count(p, 5000, &mut out), ModstanStatus::Ok);
        assert_eq!(take(out), "6");
        assert!(modstan_last_error().is_null());

        assert_eq!(modstan_module_graph(p, &mut out), ModstanStatus::Ok);
        assert!(take(out).contains("StddevInformative"));
        modstan_program_free(p);
    }
}

#[test]
fn concretize_and_neighbours() {
    let p = compiled(MEAN_STDDEV);
    unsafe {
        let mut out = ptr::null_mut();
        let sel = c("Mean:normal,Stddev:lognormal,StddevInformative:yes");
        assert_eq!(modstan_concretize(p, sel.as_ptr(), &mut out), ModstanStatus::Ok);
        assert!(take(out).contains("sigma ~ lognormal(0, 1);"));

        assert_eq!(modstan_concretize(p, c("Mean:normal").as_ptr(), &mut out), ModstanStatus::InvalidSelection);
        let e = last_error().unwrap();
        assert_eq!(e["code"], "INVALID_SELECTION");
        assert_eq!(e["violations"][0]["hole"], "Stddev");

        assert_eq!(modstan_describe_selection(p, c("Mean:normal").as_ptr(), 5000, &mut out), ModstanStatus::Ok);
        let d: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(d["compatibleModels"].as_array().unwrap().len(), 3);

        assert_eq!(modstan_neighbors(p, c("Mean:standard,Stddev:standard").as_ptr(), &mut out), ModstanStatus::Ok);
        let n: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(n["neighbors"].as_array().unwrap().len(), 3);

        assert_eq!(modstan_neighbors(p, c("Mean:").as_ptr(), &mut out), ModstanStatus::InvalidSelection);
        assert_eq!(last_error().unwrap()["code"], "SELECTION_SYNTAX");
        modstan_program_free(p);
    }
}

#[test]
fn errors_and_null_arguments() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(modstan_compile(c("model { y ~ normal(H(), 1); }").as_ptr(), &mut p), ModstanStatus::Diagnostics);
        assert!(p.is_null());
        assert_eq!(last_error().unwrap()[0]["code"], "UNFILLED_HOLE");

        assert_eq!(modstan_compile(ptr::null(), &mut p), ModstanStatus::NullArgument);
        assert_eq!(modstan_compile(c(MEAN_STDDEV).as_ptr(), ptr::null_mut()), ModstanStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(modstan_compile(bad.as_ptr().cast(), &mut p), ModstanStatus::InvalidUtf8);

        let mut out = ptr::null_mut();
        assert_eq!(modstan_model_count(ptr::null(), 10, &mut out), ModstanStatus::NullArgument);
        let q = compiled(MEAN_STDDEV);
        assert_eq!(modstan_model_count(q, 10, ptr::null_mut()), ModstanStatus::NullArgument);
        modstan_program_free(q);

        modstan_program_free(ptr::null_mut());
        modstan_string_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(modstan_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
