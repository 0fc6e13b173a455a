use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_hjblab");

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(format!("{name}.json")).to_string_lossy().into_owned()
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).env_remove("HJBLAB_OUT").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(out: &Path, command: &str) -> Value {
    let text = fs::read_to_string(out.join(format!("{command}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_outputs_exist(r: &Value) {
    for p in r["outputs"].as_array().unwrap() {
        assert!(Path::new(p.as_str().unwrap()).exists(), "{p}");
    }
    assert!(!r["summary"].as_array().unwrap().is_empty());
}

#[test]
fn residual_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p2 = model("prop2");
    let o = run(dir.path(), &["residual", "--model", &p2, "--candidate", "prop2-singular"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "residual");
    assert_outputs_exist(&r);
    assert_eq!(r["seed"], 42);
    assert!(fs::read_to_string(dir.path().join("residual.csv")).unwrap().starts_with("k,residual,V,Vprime\n"));

    let o = run(dir.path(), &["residual", "--model", &p2, "--candidate", "affine:slope=1,intercept=0"]);
    assert_eq!(code(&o), 3);
    let o = run(dir.path(), &["residual", "--model", &p2, "--candidate", "clairaut:A="]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn usage_and_configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"rho": -1, "utility": {"kind": "linear", "params": {}}, "production": {"kind": "sqrt", "params": {}}}"#,
    )
    .unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["residual".into(), "--model".into(), "nosuch".into(), "--candidate".into(), "zero".into()],
        vec!["residual".into(), "--model".into(), bad.to_string_lossy().into(), "--candidate".into(), "zero".into()],
        vec![
            "residual".into(),
            "--model".into(),
            "prop2".into(),
            "--candidate".into(),
            "zero".into(),
            "--grid".into(),
            "1:0:5".into(),
        ],
        vec!["certify".into(), "--model".into(), "prop2".into(), "--candidate".into(), "zero".into()],
        vec!["reproduce".into(), "prop3".into()],
        vec!["dp".into(), "--model".into(), "prop2".into(), "--dt".into(), "50".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(code(&run(dir.path(), &args)), 2, "{args:?}");
    }
}

#[test]
fn certify_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["certify", "--model", &model("prop2"), "--candidate", "prop2-singular", "--k0", "1"]);
    assert_eq!(code(&o), 0);
    assert_outputs_exist(&report(dir.path(), "certify"));
    assert!(dir.path().join("trajectory.csv").exists());

    let o = run(dir.path(), &["certify", "--model", &model("prop2"), "--candidate", "clairaut:A=2", "--k0", "1"]);
    assert_eq!(code(&o), 3);
    let cert: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("certification.json")).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "REJECT");
    assert!(cert["reason"]["PayoffGap"].is_object());
    assert!(String::from_utf8_lossy(&o.stdout).contains("reason = payoff-gap"));

    let o = run(dir.path(), &["certify", "--model", &model("prop1"), "--candidate", "prop1:A=2", "--k0", "1"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reason = policy-undefined"));
}

#[test]
fn viscosity_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    // the kink at k = 1 is added to the grid even though 0.5:2:20 misses it
    let o = run(
        dir.path(),
        &[
            "viscosity",
            "--model",
            &model("prop2"),
            "--candidate",
            "min(clairaut:A=2,clairaut:A=1.25)",
            "--grid",
            "0.5:2:20",
        ],
    );
    assert_eq!(code(&o), 3);
    let csv = fs::read_to_string(dir.path().join("viscosity.csv")).unwrap();
    let bad: Vec<&str> = csv.lines().filter(|l| l.contains("violated")).collect();
    assert_eq!(bad.len(), 1);
    let cols: Vec<&str> = bad[0].split(',').collect();
    assert_eq!(cols[0], "1");
    assert!((cols[5].parse::<f64>().unwrap() - 0.25).abs() < 1e-6);

    let o = run(dir.path(), &["viscosity", "--model", "prop2", "--candidate", "prop2-singular"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn audit_reports_the_failed_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["audit", "--model", &model("prop1")]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Thm2(i): FAIL (u' constant"));
    let audit: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["checks"][3]["condition"], "Thm2(i)");
    assert_eq!(audit["checks"][3]["passed"], false);
}

#[test]
fn dp_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["dp", "--model", &model("prop2")]);
    assert_eq!(code(&o), 0);
    let r = report(dir.path(), "dp");
    let probe = r["summary"].as_array().unwrap().iter().find(|c| c["name"] == "V_dp(1)").unwrap();
    let v: f64 = probe["detail"].as_str().unwrap().parse().unwrap();
    assert!((v - 2.0).abs() <= 0.05, "{v}");
    assert_eq!(fs::read_to_string(dir.path().join("dp_values.csv")).unwrap().lines().count(), 401);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["certify", "--model", "theorem2", "--candidate", "affine:slope=1,intercept=1", "--k0", "1", "--horizon", "5"];
    let read = |d: &Path| {
        ["trajectory.csv", "certification.json", "certify_report.json"].map(|f| fs::read(d.join(f)).unwrap())
    };
    run(dir.path(), &args);
    let first = read(dir.path());
    run(dir.path(), &args);
    assert_eq!(first, read(dir.path()));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(BIN).args(["audit", "--model", "theorem2"]).env("HJBLAB_OUT", &target).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("audit_report.json").exists());
}

#[test]
fn reproductions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["reproduce", "prop2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&dir.path().join("prop2"), "reproduce_prop2");
    assert_outputs_exist(&r);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches(": ACCEPT").count(), 1);
    assert_eq!(stdout.matches(": REJECT").count(), 3);

    let o = run(dir.path(), &["reproduce", "theorem2-demo"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_outputs_exist(&report(&dir.path().join("theorem2-demo"), "reproduce_theorem2-demo"));

    let o = run(dir.path(), &["reproduce", "prop1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS family vs DP separation"));
    assert_outputs_exist(&report(&dir.path().join("prop1"), "reproduce_prop1"));
}
