use std::ffi::{c_char, CString};
use std::process::Command;
use std::ptr;

use escape_lab_ffi::*;

fn message() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { esc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn lattice(trunc: u32) -> *mut EscGraph {
    let family = CString::new("lattice").unwrap();
    let mut g = ptr::null_mut();
    let s = unsafe { esc_graph_generate(family.as_ptr(), 0.0, 0.0, 0.0, 1, trunc, &mut g) };
    assert_eq!(s, EscStatus::Ok, "{}", message());
    g
}

#[test]
fn metric_on_the_integer_line() {
    let g = lattice(10);
    let mut n = 0;
    assert_eq!(unsafe { esc_graph_vertex_count(g, &mut n) }, EscStatus::Ok);
    assert_eq!(n, 21);
    let mut d = vec![0.0; n];
    assert_eq!(unsafe { esc_metric(g, 0, d.as_mut_ptr(), n) }, EscStatus::Ok);
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted[0], 0.0);
    // σ ≡ 1/√2 on ℤ, so the farthest vertex sits 10/√2 away.
    assert!((sorted[n - 1] - 10.0 / 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(
        unsafe { esc_metric(g, 0, d.as_mut_ptr(), n - 1) },
        EscStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { esc_metric(g, 999, d.as_mut_ptr(), n) },
        EscStatus::UnknownVertex
    );
    unsafe { esc_graph_free(g) };
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    let bad = CString::new("moebius").unwrap();
    let s = unsafe { esc_graph_generate(bad.as_ptr(), 0.0, 0.0, 0.0, 1, 5, &mut g) };
    assert_ne!(s, EscStatus::Ok);
    assert!(g.is_null());
    assert!(!message().is_empty());
    assert_eq!(
        unsafe { esc_graph_generate(ptr::null(), 0.0, 0.0, 0.0, 1, 5, &mut g) },
        EscStatus::NullPointer
    );
    let missing = CString::new("/nonexistent/graph.json").unwrap();
    assert_eq!(unsafe { esc_graph_load(missing.as_ptr(), &mut g) }, EscStatus::Io);
    let mut n = 0;
    assert_eq!(
        unsafe { esc_graph_vertex_count(ptr::null(), &mut n) },
        EscStatus::NullPointer
    );
    unsafe {
        esc_graph_free(ptr::null_mut());
        esc_report_free(ptr::null_mut());
    }
}

#[test]
fn subdivide_and_simulate() {
    let g = lattice(50);
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { esc_graph_subdivide_uniform(g, 1, &mut m) },
        EscStatus::InvalidArgument
    );
    assert!(m.is_null());
    assert_eq!(
        unsafe { esc_graph_subdivide_uniform(g, 2, &mut m) },
        EscStatus::Ok,
        "{}",
        message()
    );
    let (mut n_g, mut n_m) = (0, 0);
    unsafe {
        esc_graph_vertex_count(g, &mut n_g);
        esc_graph_vertex_count(m, &mut n_m);
    }
    assert_eq!(n_m, 2 * n_g - 1);
    let run = |stream| {
        let (mut t, mut j, mut st) = (0.0, 0u64, EscRunStatus::Exploded);
        let s = unsafe { esc_simulate(m, 0, 3.0, 100_000, 42, stream, &mut t, &mut j, &mut st) };
        assert_eq!(s, EscStatus::Ok, "{}", message());
        (t, j, st)
    };
    let a = run(0);
    assert_eq!(a.2, EscRunStatus::HorizonReached);
    assert_eq!(a.0, 3.0);
    assert_eq!(run(0), a);
    unsafe {
        esc_graph_free(m);
        esc_graph_free(g);
    }
}

#[test]
fn psi_round_trip() {
    let g = lattice(400);
    let (mut p, mut back) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            esc_psi(g, 0, 1.0, 16.0, 200.0, 100.0, 0, &mut p),
            EscStatus::Ok,
            "{}",
            message()
        );
        assert!(p > 0.0);
        assert_eq!(esc_psi(g, 0, 1.0, 16.0, 200.0, p, 1, &mut back), EscStatus::Ok);
        assert_eq!(
            esc_psi(g, 0, 1.0, 16.0, 200.0, 1e30, 1, &mut back),
            EscStatus::OutOfRange
        );
        esc_psi(g, 0, 1.0, 16.0, 200.0, p, 1, &mut back);
        esc_graph_free(g);
    }
    assert!((back - 100.0).abs() < 1e-8);
}

#[test]
fn experiment_report() {
    let config = CString::new(
        r#"{"kind":"occupation","family":{"kind":"lattice","truncation":200},
            "n_trajectories":100,"horizon":20,"subdivision":"uniform:2"}"#,
    )
    .unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { esc_experiment_run(config.as_ptr(), &mut r) },
        EscStatus::Ok,
        "{}",
        message()
    );
    let (mut v, mut se) = (0.0, 0.0);
    let name = CString::new("min_ratio_median").unwrap();
    assert_eq!(
        unsafe { esc_report_metric(r, name.as_ptr(), &mut v, &mut se) },
        EscStatus::Ok
    );
    assert!((0.0..=1.0).contains(&v));
    let bogus = CString::new("no_such_metric").unwrap();
    assert_eq!(
        unsafe { esc_report_metric(r, bogus.as_ptr(), &mut v, ptr::null_mut()) },
        EscStatus::InvalidArgument
    );
    let mut passed = -2;
    assert_eq!(unsafe { esc_report_passed(r, &mut passed) }, EscStatus::Ok);
    assert!(passed == 0 || passed == 1);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { esc_report_write(r, path.as_ptr()) }, EscStatus::Ok);
    assert!(dir.path().join("out/report.csv").exists());
    unsafe { esc_report_free(r) };

    let broken = CString::new(r#"{"kind":"occupation","n_trajectories":0}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_ne!(unsafe { esc_experiment_run(broken.as_ptr(), &mut r) }, EscStatus::Ok);
    assert!(r.is_null());
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"escape_lab.h\"\n\
         int main(void) {\n\
           EscGraph *g = 0;\n\
           EscStatus s = esc_graph_generate(\"lattice\", 0, 0, 0, 1, 5, &g);\n\
           esc_graph_free(g);\n\
           return s == ESC_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .expect("cc not found");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
