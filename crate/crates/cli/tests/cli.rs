use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn modspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modspace"))
        .args(args)
        .env("MODSPACE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn grid_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let space = path(dir.path(), "grid.json");
    let cert = path(dir.path(), "cert.json");
    assert_eq!(code(&modspace(&["gen", "grid", "--n", "4", "--out", &space])), 0);
    let out = modspace(&[
        "modulus", "--space", &space, "--implicit", "monotone", "--axis", "0", "--p", "2", "--out", &cert,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let value = read_json(&cert)["value"].as_f64().unwrap();
    assert!((value - 5.0 / 8.0).abs() < 1e-6, "{value}");
    assert_eq!(code(&modspace(&["duality-check", &cert])), 0);

    // A certificate whose value no longer matches its density fails the check.
    let mut doc = read_json(&cert);
    doc["value"] = Value::from(2.0 * value);
    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    assert_eq!(code(&modspace(&["duality-check", &bad])), 2);

    let out = modspace(&["alberti", "from-certificate", "--space", &space, "--certificate", &cert]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&modspace(&["alberti", "fubini", "--space", &space])), 0);
}

#[test]
fn explicit_family_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let space = path(dir.path(), "grid.json");
    let family = path(dir.path(), "family.json");
    let cert = path(dir.path(), "cert.json");
    assert_eq!(code(&modspace(&["gen", "grid", "--n", "2", "--out", &space])), 0);
    let out = modspace(&["family", "--space", &space, "--strategy", "all-simple", "--out", &family]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = modspace(&["modulus", "--space", &space, "--family", &family, "--p", "1.5", "--out", &cert]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&modspace(&["duality-check", &cert])), 0);

    // A family is tied to the space it was built on.
    let other = path(dir.path(), "other.json");
    assert_eq!(code(&modspace(&["gen", "grid", "--n", "3", "--out", &other])), 0);
    assert_eq!(code(&modspace(&["modulus", "--space", &other, "--family", &family])), 1);
}

#[test]
fn usage_and_input_errors_exit_one() {
    assert_eq!(code(&modspace(&["modulus"])), 1);
    assert_eq!(code(&modspace(&["no-such-command"])), 1);
    assert_eq!(code(&modspace(&["duality-check", "/nonexistent/cert.json"])), 1);
    assert_eq!(code(&modspace(&["modulus", "--space", "x.json", "--implicit", "connecting", "--tol", "2"])), 1);
    assert_eq!(code(&modspace(&["--help"])), 0);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let space = path(dir.path(), "slit.json");
    assert_eq!(code(&modspace(&["gen", "slit", "--k", "2", "--m", "1", "--out", &space])), 0);
    let mut certs = Vec::new();
    for run in 0..2 {
        let cert = path(dir.path(), &format!("cert{run}.json"));
        let out = modspace(&[
            "modulus", "--space", &space, "--implicit", "monotone", "--axis", "1", "--tol", "1e-5", "--out", &cert,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        certs.push(std::fs::read(&cert).unwrap());
    }
    assert_eq!(certs[0], certs[1]);
}

#[test]
fn slit_sweep_writes_table_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let out = modspace(&["report", "--scenario", "slit-vertical", "--k", "1..2", "--tol", "1e-4", "--out", &out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("slit-vertical.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let svg = std::fs::read_to_string(dir.path().join("slit-vertical.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn heisenberg_checks_pass() {
    let out = modspace(&["heis", "--tuples", "200", "--cells", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
