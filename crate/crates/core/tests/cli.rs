use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowlab"))
}

fn run(args: &[&str], out: &Path) -> (i32, String) {
    let o = bin().args(args).arg("--out").arg(out).arg("--no-timestamp").output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SADDLE: &str = r#"{"schema_version":1,"model":{"kind":"matrix","rows":2,"data":[-1.0,0.0,0.0,2.0]}}"#;

#[test]
fn spectrum_of_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SADDLE);
    let out = dir.path().join("out");
    let (code, _) = run(&["spectrum", "--config", &cfg], &out);
    assert_eq!(code, 0);
    let r = report(&out);
    assert_eq!(r["status"], "ok");
    let gap = r["result"]["gap"].as_f64().unwrap();
    assert!((gap - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert_eq!(r["result"]["hyperbolic"], true);
    assert!((r["result"]["resolvent_sup"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn shadow_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SADDLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["shadow", "--config", &cfg, "--seed", "11"], &a).0, 0);
    assert_eq!(run(&["shadow", "--config", &cfg, "--seed", "11"], &b).0, 0);
    for f in ["report.json", "trace.csv", "orbit.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r = report(&a);
    assert_eq!(r["result"]["certificate"]["pass_eps"], true);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["spectrum"], &out).0, 2);
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version":1,"model":{"kind":"scalar","rate":-1.0},"bogus":1}"#,
    );
    assert_eq!(run(&["spectrum", "--config", &cfg], &out).0, 2);
}

#[test]
fn solver_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version":1,"model":{"kind":"rotation","theta":1.0}}"#);
    let out = dir.path().join("out");
    let (code, stdout) = run(&["shadow", "--config", &cfg], &out);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(v["status"], "error");
    assert_eq!(report(&out)["status"], "error");
}

#[test]
fn demo_rotation_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["demo", "rotation"], &out).0, 0);
    let r = report(&out)["result"].clone();
    assert_eq!(r["certified"], true);
    assert!(r["lower_bound"].as_f64().unwrap() >= 0.15 - 1e-12);
}

#[test]
fn demo_heat_shadows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["demo", "heat"], &out).0, 0);
    let r = report(&out)["result"].clone();
    assert_eq!(r["l_shadowing"], true);
    assert!(r["lambda_1_relative_error"].as_f64().unwrap() < 3e-3);
    assert!(out.join("trace.csv").exists());
}
