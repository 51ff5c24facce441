use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use wavesys_ffi::*;

fn builtin(name: &str) -> *mut WsProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ws_problem_from_builtin(name.as_ptr(), &mut p) }, WsStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let p = ws_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn verify_acoustic_both_mollifiers() {
    let p = builtin("acoustic");
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(ws_verify(p, WsCase::A, &mut rep), WsStatus::Ok);
        let json = CStr::from_ptr(ws_report_json(rep)).to_str().unwrap();
        assert!(json.contains("\"aggregate\":true"));
        ws_report_free(rep);

        assert_eq!(ws_problem_set_mollifier(p, WsMollifier::Model), WsStatus::Ok);
        assert_eq!(ws_verify(p, WsCase::A, &mut rep), WsStatus::Verdict);
        let (mut total, mut failed) = (0, 0);
        assert_eq!(ws_report_counts(rep, &mut total, &mut failed), WsStatus::Ok);
        assert!(failed > 0 && failed < total);
        let mut pass = true;
        let ds = CString::new("dS").unwrap();
        assert_eq!(ws_report_net_passes(rep, ds.as_ptr(), &mut pass), WsStatus::Ok);
        assert!(!pass);
        let s = CString::new("S").unwrap();
        assert_eq!(ws_report_net_passes(rep, s.as_ptr(), &mut pass), WsStatus::Ok);
        assert!(pass);
        ws_report_free(rep);
        ws_problem_free(p);
    }
}

#[test]
fn solve_damped_problem() {
    let p = builtin("damped");
    unsafe {
        let mut dim = 0;
        assert_eq!(ws_problem_dim(p, &mut dim), WsStatus::Ok);
        assert_eq!(dim, 1);
        let mut sol = ptr::null_mut();
        assert_eq!(ws_solve(p, 0.1, WsSolver::System, &mut sol), WsStatus::Ok);
        let (mut nodes, mut comps, mut t) = (0, 0, 0.0);
        assert_eq!(ws_solution_shape(sol, &mut nodes, &mut comps, &mut t), WsStatus::Ok);
        assert_eq!(comps, 3);
        assert_eq!(t, 1.0);
        let mut u = vec![0.0; nodes];
        assert_eq!(ws_solution_component(sol, 0, u.as_mut_ptr(), nodes), WsStatus::Ok);
        let exact = 1.0 - (-1f64).exp();
        assert!(u.iter().all(|v| (v - exact).abs() < 1e-4));
        assert_eq!(ws_solution_component(sol, 0, u.as_mut_ptr(), nodes + 1), WsStatus::Input);
        assert_eq!(ws_solution_component(sol, 3, u.as_mut_ptr(), nodes), WsStatus::Input);
        ws_solution_free(sol);
        ws_problem_free(p);
    }
}

#[test]
fn equivalence_orders_on_dalembert() {
    let p = builtin("dalembert");
    let (mut d, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { ws_equivalence_orders(p, &mut d, &mut r) }, WsStatus::Ok);
    assert!(d >= 1.9 && r >= 1.9, "{d} {r}");
    unsafe { ws_problem_free(p) };
}

#[test]
fn classify_and_sqrt() {
    let eps: Vec<f64> = (4..=14).map(|k| 2f64.powi(-k)).collect();
    let vals: Vec<f64> = eps.iter().map(|e| 3.0 * (1.0 / e).ln()).collect();
    let mut c = WsClassification {
        kind: WsClassKind::Divergent,
        order: 0,
        exponent: 0.0,
        log_coefficient: 0.0,
    };
    assert_eq!(unsafe { ws_classify(eps.as_ptr(), vals.as_ptr(), eps.len(), &mut c) }, WsStatus::Ok);
    assert_eq!(c.kind, WsClassKind::LogType);
    assert!((c.log_coefficient - 3.0).abs() < 0.05);

    let r = [4.0, 0.0, 0.0, 9.0];
    let mut s = [0.0; 4];
    assert_eq!(unsafe { ws_spd_sqrt(r.as_ptr(), 2, s.as_mut_ptr()) }, WsStatus::Ok);
    assert!((s[0] - 2.0).abs() < 1e-12 && (s[3] - 3.0).abs() < 1e-12 && s[1].abs() < 1e-12);
    let bad = [1.0, 0.0, 0.0, -1.0];
    assert_eq!(unsafe { ws_spd_sqrt(bad.as_ptr(), 2, s.as_mut_ptr()) }, WsStatus::Numerical);
}

#[test]
fn error_codes() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(ws_problem_from_builtin(ptr::null(), &mut p), WsStatus::NullPointer);
        assert!(last_error().contains("null"));
        let empty = CString::new("").unwrap();
        assert_eq!(ws_problem_from_spec(empty.as_ptr(), &mut p), WsStatus::Input);
        assert!(last_error().contains("missing keys"));
        let name = CString::new("nope").unwrap();
        assert_eq!(ws_problem_from_builtin(name.as_ptr(), &mut p), WsStatus::Input);
        assert_eq!(ws_problem_dim(ptr::null(), &mut 0), WsStatus::NullPointer);
        ws_problem_free(ptr::null_mut());
        ws_report_free(ptr::null_mut());
        ws_solution_free(ptr::null_mut());
        assert!(ws_report_json(ptr::null()).is_null());
        assert_eq!(CStr::from_ptr(ws_status_name(WsStatus::Blowup)).to_str().unwrap(), "numerical blow-up");
    }
}

#[test]
fn blow_up_status() {
    let text = "dimension = 1\nhorizon = 4.0\n[domain]\nlower = [0.0]\nupper = [1.0]\n[coefficients]\nR = \"1\"\n\
                [initial]\nu0 = \"sin(2*pi*x)\"\n[grid]\nh = 0.01\nboundary = \"periodic\"\ntau = 0.01125\nstrict_cfl = false\n";
    let text = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(ws_problem_from_spec(text.as_ptr(), &mut p), WsStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(ws_solve(p, 0.1, WsSolver::System, &mut sol), WsStatus::Blowup);
        assert!(sol.is_null());
        assert!(last_error().contains("blow-up"));
        ws_problem_free(p);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/wavesys.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["ws_problem_from_spec", "ws_verify", "ws_solve", "WS_STATUS_PANIC = 6", "typedef struct WsProblem WsProblem"] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint probe(void) {{ WsProblem *p = 0; return ws_problem_dim(p, 0) == WS_STATUS_NULL_POINTER; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
