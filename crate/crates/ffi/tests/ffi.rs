use std::ffi::{CStr, CString};
use std::ptr;

use qpjacobi_ffi::*;

const PERIOD_TWO: &str = r#"{
  "edges": [-1.3, -0.3, 0.3, 1.3],
  "dirichlet": { "mus": [0.0], "sigmas": [1] },
  "perturbation": [{ "n": 0, "db": 0.3 }, { "n": 1, "da": 0.2 }],
  "grid": 32
}"#;

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    qpj_string_free(s);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qpj_last_error()).to_str().unwrap().to_owned() }
}

#[test]
fn forward_inverse_through_handles() {
    unsafe {
        let cfg = CString::new(PERIOD_TWO).unwrap();
        let mut sc = ptr::null_mut();
        assert_eq!(qpj_scenario_new(cfg.as_ptr(), &mut sc), QpjStatus::Ok);
        let mut data = ptr::null_mut();
        let mut report = ptr::null_mut();
        assert_eq!(qpj_forward(sc, &mut data, &mut report), QpjStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(report["status"], "PASS");

        let mut count = 0usize;
        assert_eq!(qpj_data_bound_state_count(data, &mut count), QpjStatus::Ok);
        assert_eq!(count, 3);
        let mut b = QpjBoundState::default();
        assert_eq!(qpj_data_bound_state(data, 0, &mut b), QpjStatus::Ok);
        assert!(b.rho < -1.3 && b.gamma_plus > 0.0);
        assert_eq!(qpj_data_bound_state(data, 3, &mut b), QpjStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        assert_eq!(qpj_data_node_count(data, &mut count), QpjStatus::Ok);
        assert_eq!(count, 2 * 2 * 32);
        let mut node = QpjNode::default();
        assert_eq!(qpj_data_node(data, 5, &mut node), QpjStatus::Ok);
        let unit = node.t_re.powi(2) + node.t_im.powi(2) + node.r_plus_re.powi(2) + node.r_plus_im.powi(2);
        assert!((unit - 1.0).abs() < 1e-10);

        let mut text = ptr::null_mut();
        assert_eq!(qpj_data_to_interchange(data, &mut text), QpjStatus::Ok);
        let text = CString::new(take(text)).unwrap();
        let mut copy = ptr::null_mut();
        assert_eq!(qpj_data_from_interchange(text.as_ptr(), &mut copy), QpjStatus::Ok);

        assert_eq!(qpj_validate(copy, ptr::null(), ptr::null_mut()), QpjStatus::Ok, "{}", last_error());
        let (mut a, mut bb) = (vec![0.0; 17], vec![0.0; 17]);
        let mut report = ptr::null_mut();
        let st = qpj_inverse(copy, cfg.as_ptr(), a.as_mut_ptr(), bb.as_mut_ptr(), 17, &mut report);
        assert_eq!(st, QpjStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert!(report["max_error"].as_f64().unwrap() < 1e-6);
        // n = 0 and n = 1 sit at indices 8 and 9 of [-8, 8].
        assert!((bb[8] - 0.3).abs() < 1e-6);
        let a_q = report["reconstruction"]["a_q"][9].as_f64().unwrap();
        assert!((a[9] - a_q - 0.2).abs() < 1e-6);
        assert_eq!(qpj_inverse(copy, cfg.as_ptr(), a.as_mut_ptr(), ptr::null_mut(), 3, ptr::null_mut()), QpjStatus::OutOfRange);

        qpj_data_free(copy);
        qpj_data_free(data);
        qpj_scenario_free(sc);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(qpj_scenario_new(ptr::null(), &mut sc), QpjStatus::NullPointer);
        let bad = CString::new(r#"{"edges": [1.0, -1.0]}"#).unwrap();
        assert_eq!(qpj_scenario_new(bad.as_ptr(), &mut sc), QpjStatus::InvalidInput);
        assert!(sc.is_null());
        assert!(last_error().contains("edges"));
        let junk = CString::new("not json").unwrap();
        assert_eq!(qpj_scenario_new(junk.as_ptr(), &mut sc), QpjStatus::InvalidInput);
        let mut data = ptr::null_mut();
        assert_eq!(qpj_data_from_interchange(junk.as_ptr(), &mut data), QpjStatus::InvalidInput);
        qpj_string_free(ptr::null_mut());
        qpj_data_free(ptr::null_mut());
        qpj_scenario_free(ptr::null_mut());
    }
}

#[test]
fn surface_report_json() {
    unsafe {
        let cfg = CString::new(r#"{"edges": [-1.0, 1.0]}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(qpj_surface_report(cfg.as_ptr(), 7, &mut out), QpjStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!((v["report"]["atilde"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    }
}
