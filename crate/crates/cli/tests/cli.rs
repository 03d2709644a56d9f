use std::path::PathBuf;
use std::process::{Command, Output};

use reachcert::pipeline::JSON_ARTIFACTS;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reachcert"));
    c.env_remove("REACHCERT_SEED").env("RUST_LOG", "warn");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(c: &mut Command) -> Output {
    let out = c.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    }
    out
}

#[test]
fn hover_run_all_certifies_and_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["run-all", "--scenario"]).arg(scenario("hover.json")).arg("--out-dir").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    for name in JSON_ARTIFACTS {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let traces = std::fs::read_dir(dir.path().join("traces")).unwrap().count();
    assert_eq!(traces, 20);
    assert!(String::from_utf8_lossy(&out.stdout).contains("certified"));
}

#[test]
fn obstacle_start_fails_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("reference.json")).unwrap();
    let mut s: serde_json::Value = serde_json::from_str(&text).unwrap();
    s["p0"] = serde_json::json!([1.75, 1.0, 1.0]);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let out = bin().args(["run-all", "--scenario"]).arg(&path).arg("--out-dir").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `load` failed"), "{err}");
    assert!(err.contains("initial position must lie outside every obstacle"), "{err}");
}

#[test]
fn run_all_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(bin().args(["run-all", "--seed", "3", "--scenario"]).arg(scenario("reference.json")).arg("--out-dir").arg(d));
        assert_eq!(out.status.code(), Some(0));
    }
    for name in JSON_ARTIFACTS {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, format!(r#"{{"scenario": {:?}, "rrt": {{"seed": 3}}}}"#, scenario("reference.json"))).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(bin().args(["run-all", "--seed", "4", "--config"]).arg(&cfg).arg("--out-dir").arg(&a)).status.success());
    assert!(run(bin().env("REACHCERT_SEED", "4").args(["run-all", "--config"]).arg(&cfg).arg("--out-dir").arg(&b)).status.success());
    assert_eq!(std::fs::read(a.join("tube.json")).unwrap(), std::fs::read(b.join("tube.json")).unwrap());
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = scenario("reference.json");
    assert!(run(bin().args(["tune-gains", "--epochs", "3", "--chains", "2", "--out"]).arg(d.join("gains.json"))).status.success());
    assert!(run(bin().args(["bounds", "--scenario"]).arg(&s).arg("--out").arg(d.join("bounds.json"))).status.success());
    let bounds: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("bounds.json")).unwrap()).unwrap();
    for key in ["c1", "c2", "beta", "alpha0", "alpha1", "alpha2", "vbar2", "Lu", "Lp", "Lv", "Lf", "Fbar"] {
        assert!(bounds["bounds"][key].is_f64(), "{key}");
    }
    assert!(run(bin().args(["plan-tube", "--scenario"]).arg(&s).arg("--bounds").arg(d.join("bounds.json")).arg("--out").arg(d.join("tube.json"))).status.success());
    assert!(run(bin()
        .args(["synth-traj", "--scenario"])
        .arg(&s)
        .arg("--tube")
        .arg(d.join("tube.json"))
        .arg("--bounds")
        .arg(d.join("bounds.json"))
        .arg("--out")
        .arg(d.join("trajectory.json")))
    .status
    .success());
    assert!(run(bin()
        .args(["simulate", "--count", "3", "--scenario"])
        .arg(&s)
        .arg("--bounds")
        .arg(d.join("bounds.json"))
        .arg("--trajectory")
        .arg(d.join("trajectory.json"))
        .arg("--out-dir")
        .arg(d.join("traces")))
    .status
    .success());
    let cert = run(bin().args(["certify", "--scenario"]).arg(&s).arg("--bounds").arg(d.join("bounds.json")).arg("--traces").arg(d.join("traces")).arg("--out").arg(d.join("cert.json")));
    assert_eq!(cert.status.code(), Some(0));
    assert!(run(bin()
        .args(["sample-init", "--recipe", "attitude", "--n", "200", "--scenario"])
        .arg(&s)
        .arg("--bounds")
        .arg(d.join("bounds.json"))
        .arg("--out")
        .arg(d.join("samples.csv")))
    .status
    .success());
    assert_eq!(std::fs::read_to_string(d.join("samples.csv")).unwrap().lines().count(), 201);
}

#[test]
fn certify_rejects_a_corrupted_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(bin().args(["run-all", "--scenario"]).arg(scenario("hover.json")).arg("--out-dir").arg(d)).status.success());
    let path = d.join("traces").join("trace_00.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Move the vehicle far outside the domain in one sample.
    let mut fields: Vec<String> = lines[10].split(',').map(String::from).collect();
    fields[1] = "100.0".into();
    lines[10] = fields.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = bin()
        .args(["certify", "--scenario"])
        .arg(scenario("hover.json"))
        .arg("--bounds")
        .arg(d.join("bounds.json"))
        .arg("--traces")
        .arg(d.join("traces"))
        .arg("--out")
        .arg(d.join("recheck.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trace_00.csv") && err.contains("safe_set"), "{err}");
}

#[test]
fn stale_bounds_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = scenario("reference.json");
    assert!(run(bin().args(["bounds", "--scenario"]).arg(&s).arg("--out").arg(d.join("bounds.json"))).status.success());
    let text = std::fs::read_to_string(d.join("bounds.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["bounds"]["Lp"] = serde_json::json!(0.01);
    std::fs::write(d.join("bounds.json"), v.to_string()).unwrap();
    let out = bin().args(["plan-tube", "--scenario"]).arg(&s).arg("--bounds").arg(d.join("bounds.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not match"));
}
