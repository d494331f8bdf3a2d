use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use bohrsom_ffi::*;

fn model(config: &str) -> *mut BsModel {
    let c = CString::new(config).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { bs_model_from_config(c.as_ptr(), &mut m) };
    assert_eq!(s, BsStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = bs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn harmonic_levels_through_the_abi() {
    let m = model("family = \"harmonic\"\n");
    let mut out = [0.0; 4];
    let s = unsafe { bs_spectrum(m, 0.1, 0, 3, 2, out.as_mut_ptr(), out.len()) };
    assert_eq!(s, BsStatus::Ok);
    for (n, e) in out.iter().enumerate() {
        assert!((e - 0.1 * (2 * n + 1) as f64).abs() < 1e-8);
    }
    assert!(bs_last_error().is_null());

    let mut oracle = [0.0; 3];
    assert_eq!(unsafe { bs_oracle_eigenvalues(m, 0.1, 3, oracle.as_mut_ptr()) }, BsStatus::Ok);
    assert!((oracle[2] - 0.5).abs() < 1e-8);

    let mut a = BsActions::default();
    assert_eq!(unsafe { bs_actions(m, 1.0, &mut a) }, BsStatus::Ok);
    assert!((a.s0 - std::f64::consts::PI).abs() < 1e-10);
    assert!((a.period - std::f64::consts::PI).abs() < 1e-10);
    assert!(a.s1.abs() < 1e-12);
    unsafe { bs_model_free(m) };
}

#[test]
fn sign_override_changes_p2_shift() {
    let m = model("family = \"harmonic\"\np2 = [[1.0, 0, 0]]\n");
    let mut e = 0.0;
    assert_eq!(unsafe { bs_quantize(m, 0.1, 0, 2, &mut e) }, BsStatus::Ok);
    assert!((e - 0.11).abs() < 1e-8);
    assert_eq!(unsafe { bs_model_set_signs(m, -1.0, 1.0, 1.0) }, BsStatus::Ok);
    assert_eq!(unsafe { bs_quantize(m, 0.1, 0, 2, &mut e) }, BsStatus::Ok);
    assert!((e - 0.09).abs() < 1e-8);
    assert_eq!(unsafe { bs_model_set_signs(m, 0.0, 1.0, 1.0) }, BsStatus::InvalidArgument);
    unsafe { bs_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bs_model_from_config(ptr::null(), &mut m) }, BsStatus::NullPointer);
    assert!(last_error().contains("config"));

    let bad = CString::new("family = \"nope\"").unwrap();
    assert_eq!(unsafe { bs_model_from_config(bad.as_ptr(), &mut m) }, BsStatus::Config);
    assert!(m.is_null());

    let raw = [0xffu8, 0xfe, 0];
    let s = unsafe { bs_model_from_config(raw.as_ptr().cast(), &mut m) };
    assert_eq!(s, BsStatus::InvalidUtf8);

    let m = model("family = \"morse\"\nmorse = { A = 1.0, a = 1.0 }\n");
    let mut e = 0.0;
    assert_eq!(unsafe { bs_quantize(m, 0.1, 0, 3, &mut e) }, BsStatus::InvalidArgument);
    assert_eq!(unsafe { bs_quantize(m, -0.1, 0, 2, &mut e) }, BsStatus::Solver);
    assert_eq!(unsafe { bs_quantize(m, 0.2, 50, 0, &mut e) }, BsStatus::Solver);
    assert!(!last_error().is_empty());
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { bs_spectrum(m, 0.1, 0, 4, 2, small.as_mut_ptr(), small.len()) },
        BsStatus::BufferTooSmall
    );
    assert_eq!(unsafe { bs_quantize(ptr::null(), 0.1, 0, 2, &mut e) }, BsStatus::NullPointer);
    unsafe { bs_model_free(m) };
    unsafe { bs_model_free(ptr::null_mut()) };
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("bohrsom.h")).unwrap();
    for f in [
        "bs_model_from_config",
        "bs_model_free",
        "bs_model_set_signs",
        "bs_quantize",
        "bs_spectrum",
        "bs_oracle_eigenvalues",
        "bs_actions",
        "bs_last_error",
        "typedef struct BsModel BsModel",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
    if !have_cc() {
        eprintln!("no C compiler, skipping link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "bohrsom.h"
int main(void) {
  BsModel *m = NULL;
  if (bs_model_from_config("family = \"harmonic\"\n", &m) != BS_STATUS_OK) return 1;
  double e = 0.0;
  if (bs_quantize(m, 0.1, 2, 2, &e) != BS_STATUS_OK) return 2;
  if (fabs(e - 0.5) > 1e-8) return 3;
  if (bs_quantize(m, 0.1, 2, 7, &e) != BS_STATUS_INVALID_ARGUMENT) return 4;
  if (bs_last_error() == NULL) return 5;
  bs_model_free(m);
  printf("%.12f\n", e);
  return 0;
}
"#,
    )
    .unwrap();
    // The test binary sits in target/<profile>/deps; the static library one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = lib_dir.join("libbohrsom_ffi.a");
    if !lib.exists() {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-I"])
            .arg(&include)
            .arg(&src)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        return;
    }
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.500000000000");
}
