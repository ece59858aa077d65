use std::ffi::{c_char, CStr, CString};
use std::ptr;

use dataloop_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { dl_string_free(s) };
    out
}

fn last_error() -> String {
    let p = dl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const CSV: &[u8] = b"age,sex,income\n34,M,52000\n29,F,\n41,F,61000\n";

#[test]
fn profile_from_bytes() {
    let name = CString::new("toy.csv").unwrap();
    let mut p = ptr::null_mut();
    let st = unsafe { dl_profile_from_bytes(name.as_ptr(), CSV.as_ptr(), CSV.len(), &mut p) };
    assert_eq!(st, DlStatus::Ok);
    unsafe {
        assert_eq!(dl_profile_n_rows(p), 3);
        assert_eq!(dl_profile_n_cols(p), 3);
        let mut s = ptr::null_mut();
        assert_eq!(dl_profile_to_json(p, &mut s), DlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        assert_eq!(v["n_rows"], 3);
        assert_eq!(dl_profile_render_text(p, &mut s), DlStatus::Ok);
        assert!(take(s).contains("income"));
        dl_profile_free(p);
    }
}

#[test]
fn profile_open_missing_file() {
    let path = CString::new("/nonexistent/x.csv").unwrap();
    let mut p = ptr::null_mut();
    let st = unsafe { dl_profile_open(path.as_ptr(), &mut p) };
    assert_ne!(st, DlStatus::Ok);
    assert!(p.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_rejected() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dl_profile_open(ptr::null(), &mut p) }, DlStatus::NullArgument);
    assert_eq!(unsafe { dl_accuracy(1, 1, 0, 0, ptr::null_mut()) }, DlStatus::NullArgument);
    assert_eq!(unsafe { dl_profile_n_rows(ptr::null()) }, 0);
    unsafe {
        dl_profile_free(ptr::null_mut());
        dl_kb_free(ptr::null_mut());
        dl_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8() {
    let bad = [0xffu8, 0xfe, 0];
    let mut n = 0usize;
    assert_eq!(unsafe { dl_count_tokens(bad.as_ptr().cast(), &mut n) }, DlStatus::InvalidUtf8);
}

#[test]
fn knowledge_base_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut kb = ptr::null_mut();
    unsafe {
        assert_eq!(dl_kb_open(d.as_ptr(), &mut kb), DlStatus::Ok);
        let desc = CString::new("fit a cox proportional hazards survival model").unwrap();
        let code = CString::new("from lifelines import CoxPHFitter").unwrap();
        let mut id = ptr::null_mut();
        assert_eq!(dl_kb_add(kb, desc.as_ptr(), code.as_ptr(), &mut id), DlStatus::Ok);
        let id = take(id);
        assert_eq!(dl_kb_len(kb), 1);

        let mut s = ptr::null_mut();
        assert_eq!(dl_kb_list_json(kb, &mut s), DlStatus::Ok);
        assert!(take(s).contains(&id));

        let q = CString::new("fit a cox proportional hazards survival model").unwrap();
        assert_eq!(dl_kb_match(kb, q.as_ptr(), f64::NAN, &mut s), DlStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        assert!(!v["matched"].is_null());

        assert_eq!(dl_kb_match(kb, q.as_ptr(), 2.0, &mut s), DlStatus::Domain);

        let cid = CString::new(id.clone()).unwrap();
        assert_eq!(dl_kb_remove(kb, cid.as_ptr()), DlStatus::Ok);
        assert_eq!(dl_kb_remove(kb, cid.as_ptr()), DlStatus::NotFound);
        dl_kb_free(kb);

        let mut mem = ptr::null_mut();
        assert_eq!(dl_kb_new_in_memory(&mut mem), DlStatus::Ok);
        assert_eq!(dl_kb_len(mem), 0);
        dl_kb_free(mem);
    }
}

#[test]
fn numeric_helpers() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(dl_accuracy(40, 50, 5, 5, &mut x), DlStatus::Ok);
        assert!((x - 0.9).abs() < 1e-12);
        assert_eq!(dl_accuracy(0, 0, 0, 0, &mut x), DlStatus::Domain);

        let y = [1.0, 2.0, 3.0];
        let h = [1.0, 2.0, 5.0];
        assert_eq!(dl_mse(y.as_ptr(), 3, h.as_ptr(), 3, &mut x), DlStatus::Ok);
        assert!((x - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(dl_mse(y.as_ptr(), 3, h.as_ptr(), 2, &mut x), DlStatus::Dimension);

        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        assert_eq!(dl_cosine_similarity(a.as_ptr(), b.as_ptr(), 2, &mut x), DlStatus::Ok);
        assert!(x.abs() < 1e-12);
        let z = [0.0, 0.0];
        assert_eq!(dl_cosine_similarity(a.as_ptr(), z.as_ptr(), 2, &mut x), DlStatus::DegenerateVector);

        let mut cap = 0u64;
        assert_eq!(dl_estimate_api_capacity(8192, 1024, 100, &mut cap), DlStatus::Ok);
        assert_eq!(cap, 71);
        assert_eq!(dl_estimate_api_capacity(8192, 8192, 100, &mut cap), DlStatus::Domain);

        let t = CString::new("hello world").unwrap();
        let mut n = 0usize;
        assert_eq!(dl_count_tokens(t.as_ptr(), &mut n), DlStatus::Ok);
        assert!(n > 0);
    }
}

#[test]
fn ablation_is_seeded() {
    let run = |mode| {
        let mut passed = 0usize;
        let st = unsafe { dl_run_ablation(454, 0.68, 0.5, 7, mode, 5, &mut passed) };
        assert_eq!(st, DlStatus::Ok);
        passed
    };
    let base = run(DlAblationMode::ProgrammerOnly);
    assert_eq!(base, run(DlAblationMode::ProgrammerOnly));
    assert!(run(DlAblationMode::ProgrammerPlusInspector) >= base);
    let mut passed = 0usize;
    let st = unsafe { dl_run_ablation(10, 1.5, 0.5, 7, DlAblationMode::ProgrammerOnly, 5, &mut passed) };
    assert_eq!(st, DlStatus::Domain);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
