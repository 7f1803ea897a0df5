use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shallowcl")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn classify_flat_and_generic() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(dir.path(), "flat.toml", "[topography]\nexpr = \"0\"\n[expect]\ncase = \"14a\"\ndimension = 9\n");
    let o = run(&["classify", "--topo", &flat, "--points", "200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["case"], "14a");
    assert_eq!(v["dimension"], 9);
    assert_eq!(v["basis"].as_array().unwrap().len(), 9);

    let o = run(&["classify", "--topo", "expr:exp(x)*sin(y) + x^3*y", "--points", "200"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["case"], "generic");
    assert_eq!(v["dimension"], 2);
    assert_eq!(v["k"], 0);
}

#[test]
fn classify_reports_mismatch_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = write(dir.path(), "wrong.toml", "[topography]\nexpr = \"0\"\n[expect]\ncase = \"14b\"\n");
    assert_eq!(code(&run(&["classify", "--topo", &wrong, "--points", "100"])), 1);
    let bad = write(dir.path(), "bad.toml", "[topography\nexpr = 0");
    let o = run(&["classify", "--topo", &bad]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
    assert_eq!(code(&run(&["classify", "--topo", "expr:x +"])), 64);
    assert_eq!(code(&run(&["classify", "--topo", "/definitely/missing.toml"])), 66);
    assert_eq!(code(&run(&["classify"])), 64);
    assert_eq!(code(&run(&["classify", "--topo", "case:14a", "--tol", "-1"])), 64);
}

#[test]
fn json_output_is_reproducible() {
    let a = run(&["classify", "--topo", "fixture:7a-plus", "--seed", "5", "--points", "200", "--emit-template"]);
    let b = run(&["classify", "--topo", "fixture:7a-plus", "--seed", "5", "--points", "200", "--emit-template"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["template"]["rows"].as_array().unwrap().len(), 2);
    assert!(v["template"]["compatibility"]["ok"].as_bool().unwrap());
}

#[test]
fn chars_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis.json");
    let o = run(&["chars", "--topo", "fixture:9-half", "--points", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["dimension"], 6);
    for key in ["classifying", "cosymmetry", "divergence"] {
        assert!(v["residuals"][key].as_f64().unwrap() < 1e-8);
    }
    let tuples = serde_json::to_string(&v["tuples"]).unwrap();
    let t = write(dir.path(), "tuples.json", &tuples);
    assert_eq!(code(&run(&["verify", "--topo", "fixture:9-half", "--tuples", &t, "--points", "100"])), 0);
    // momentum is not conserved over a sloping bottom
    let p = write(dir.path(), "p.json", r#"[{"c1":0,"f1":[],"f2":[{"rate":0,"freq":0,"deg":0,"c":1,"s":0}],"f3":[],"f4":[]}]"#);
    let o = run(&["verify", "--topo", "fixture:14b", "--tuples", &p, "--points", "100"]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)[0]["pass"], false);
}

#[test]
fn report_over_a_fixture_directory() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a-flat.toml", "[topography]\ncase = \"14a\"\n[expect]\ncase = \"14a\"\ndimension = 9\n");
    write(dir.path(), "b-slope.toml", "[topography]\ncase = \"14b\"\n[expect]\ncase = \"14b\"\ndimension = 9\n");
    let d = dir.path().to_str().unwrap();
    let o = run(&["report", "--fixtures", d, "--points", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    write(dir.path(), "c-wrong.toml", "[topography]\ncase = \"14c\"\n[expect]\ncase = \"14c\"\ndimension = 6\n");
    let o = run(&["report", "--fixtures", d, "--points", "100"]);
    assert_eq!(code(&o), 1);
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().filter(|l| l.contains("FAIL")).count(), 1, "{table}");
    assert!(table.lines().any(|l| l.starts_with("c-wrong") && l.contains("FAIL")));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["report", "--fixtures", empty.path().to_str().unwrap()])), 66);
}

#[test]
fn transform_orbit_casimir_audit() {
    let o = run(&["transform", "--map", "T1", "--topo", "fixture:3c-sin", "--check-case", "--points", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["target_case"], "3a");
    assert!(v["residual_ratio"].as_f64().unwrap() <= 5.0);
    assert_eq!(code(&run(&["transform", "--map", "T1", "--topo", "fixture:3a-sin"])), 64);
    assert_eq!(code(&run(&["transform", "--map", "T9", "--topo", "fixture:3a-sin"])), 64);

    let o = run(&["orbit", "--topo", "case:14a"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["closed"], true);
    assert_eq!(v["dimension"], 9);

    let o = run(&["casimir", "--R", "q2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(code(&run(&["casimir", "--R", "q7"])), 64);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("audit.csv");
    let state = dir.path().join("state.json");
    let o = run(&[
        "audit", "--topo", "case:14a", "--nx", "32", "--T", "0.1", "--out", csv.to_str().unwrap(), "--save-state", state.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let head = text.lines().next().unwrap();
    assert!(head.starts_with("step,t,g0:integral,g0:boundary_flux,g0:residual"), "{head}");
    assert_eq!(code(&run(&["casimir", "--state", state.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["audit", "--topo", "case:14a", "--nx", "32", "--T", "0.1", "--dt", "1.0"])), 64);
}
