use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpjacobi"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qpjacobi-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str], cfg: Option<&Path>, out: &Path) -> (i32, serde_json::Value) {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = cfg {
        cmd.arg("--config").arg(c);
    }
    let o = cmd.output().unwrap();
    let v = serde_json::from_slice(&o.stdout).unwrap_or(serde_json::Value::Null);
    (o.status.code().unwrap(), v)
}

#[test]
fn bundled_configs_round_trip() {
    for name in ["free.json", "single_site.json", "period_two.json"] {
        let out = scratch(name);
        let (code, report) = run(&["roundtrip"], Some(&config(name)), &out);
        assert_eq!(code, 0, "{name}: {report}");
        assert_eq!(report["status"], "PASS");
        assert!(report["max_error"].as_f64().unwrap() < 1e-6);
        assert!(report["decay_constants"]["k_plus"]["constant"].is_number());
        assert!(report["smallest_eigenvalues_plus"].as_array().unwrap().iter().all(|e| e.as_f64().unwrap() > 0.0));
    }
}

#[test]
fn forward_then_inverse_and_determinism() {
    let a = scratch("fwd-a");
    let b = scratch("fwd-b");
    let cfg = config("single_site.json");
    let (code, report) = run(&["forward"], Some(&cfg), &a);
    assert_eq!(code, 0);
    assert_eq!(report["bound_states"].as_array().unwrap().len(), 1);
    assert!((report["bound_states"][0]["rho"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    run(&["forward"], Some(&cfg), &b);
    for f in ["scattering.dat", "forward.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }

    let data = a.join("scattering.dat");
    let (code, report) = run(&["inverse", data.to_str().unwrap()], Some(&cfg), &a);
    assert_eq!(code, 0, "{report}");
    assert!(report["max_error"].as_f64().unwrap() < 1e-8);
    let csv = fs::read_to_string(a.join("reconstruction.csv")).unwrap();
    assert!(csv.starts_with("n,a_q,b_q,a_plus,b_plus,a_minus,b_minus,a_rec,b_rec,"));
    assert_eq!(csv.lines().count(), 1 + 17);

    let (code, report) = run(&["validate", data.to_str().unwrap()], None, &a);
    assert_eq!(code, 0);
    assert!(report["clauses"].as_array().unwrap().iter().all(|c| c["status"] != "FAIL"));
}

#[test]
fn tampered_file_fails_validation_before_solving() {
    let dir = scratch("tamper");
    run(&["forward"], Some(&config("period_two.json")), &dir);
    let text = fs::read_to_string(dir.join("scattering.dat")).unwrap();
    let (head, body) = text.split_once('\n').unwrap();
    let mut header: serde_json::Value = serde_json::from_str(head).unwrap();
    for key in ["gamma_plus", "gamma_minus"] {
        let g = header["bound_states"][0][key].as_f64().unwrap();
        header["bound_states"][0][key] = (-g).into();
    }
    let bad = dir.join("bad.dat");
    fs::write(&bad, format!("{header}\n{body}")).unwrap();
    let (code, report) = run(&["inverse", bad.to_str().unwrap()], None, &dir);
    assert_eq!(code, 2);
    assert!(report["reconstruction"].is_null());
    let clause = report["validation"]["clauses"].as_array().unwrap().iter().find(|c| c["name"] == "ii").unwrap().clone();
    assert_eq!(clause["status"], "FAIL");
    assert!(!dir.join("reconstruction.csv").exists());
}

#[test]
fn hard_errors_exit_with_one() {
    let dir = scratch("errors");
    fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"edges": [1.0, -1.0]}"#).unwrap();
    let (code, _) = run(&["forward"], Some(&bad), &dir);
    assert_eq!(code, 1);
    fs::write(&bad, r#"{"edges": [-1.0, 1.0], "grid": 2}"#).unwrap();
    assert_eq!(run(&["forward"], Some(&bad), &dir).0, 1);
    fs::write(&bad, r#"{"edges": [-1.0, 1.0], "perturbation": [{"n": 0, "da": -0.6}]}"#).unwrap();
    assert_eq!(run(&["forward"], Some(&bad), &dir).0, 1);
    assert_eq!(run(&["forward"], None, &dir).0, 1);
    assert_eq!(run(&["validate", "/nonexistent/data"], None, &dir).0, 1);
}

#[test]
fn surface_report_outputs() {
    let dir = scratch("surface");
    let (code, report) = run(&["surface-report", "--seed", "3"], Some(&config("period_two.json")), &dir);
    assert_eq!(code, 0);
    assert!(report["report"]["lambdas"][0].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(report["report"]["slit_tips"].as_array().unwrap().len(), 1);
    let csv = fs::read_to_string(dir.join("surface_samples.csv")).unwrap();
    assert!(csv.starts_with("kind,index,x,re_w,im_w"));
    assert_eq!(csv.lines().count(), 1 + 3 * 16);
    let (_, free) = run(&["surface-report"], Some(&config("free.json")), &dir);
    assert!((free["report"]["atilde"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
