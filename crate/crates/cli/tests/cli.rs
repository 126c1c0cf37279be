use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gqlab"));
    c.env_remove("GQLAB_OUT_DIR");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("gqlab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn verify_writes_a_stable_report() {
    let d = scratch("verify");
    let run = |sub: &str| {
        let o = bin().args(["verify", "--suite", "grassmann", "--seed", "5", "--out"]).arg(d.join(sub)).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        std::fs::read(d.join(sub).join("grassmann-seed5.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    for key in ["\"checks\"", "\"suite\": \"grassmann\"", "\"seed\": 5", "\"timings\"", "\"version\""] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let d = scratch("config");
    let cfg = d.join("bad.json");
    std::fs::write(&cfg, r#"{"suite": "grassmann", "tolerances": {"grass.associativity": -1e-12}}"#).unwrap();
    let o = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerances.grass.associativity"));
    let o = bin().args(["verify", "--suite", "nonsense"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["verify", "--suite", "grassmann", "--tol-scale", "-1"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn failing_checks_exit_with_one() {
    let d = scratch("fail");
    let o = bin().args(["verify", "--suite", "grassmann", "--tol-scale", "1e-30", "--out"]).arg(&d).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn table_and_compare() {
    let d = scratch("table");
    let o = bin().args(["verify", "--suite", "symmetry", "--out"]).arg(&d).output().unwrap();
    assert_eq!(code(&o), 0);
    let json = d.join("symmetry-seed42.json");
    let o = bin().arg("table").arg(&json).args(["--format", "csv", "--format", "json", "--out"]).arg(d.join("t")).output().unwrap();
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.join("t/symmetry-seed42.csv")).unwrap();
    let n_checks = std::fs::read_to_string(&json).unwrap().matches("\"id\":").count();
    assert_eq!(csv.lines().count(), n_checks + 1);
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(d.join("t/symmetry-seed42.json")).unwrap());

    // re-running the golden suite reproduces it
    let o = bin().arg("compare").arg(&json).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    // a drifted measurement is flagged
    let text = std::fs::read_to_string(&json).unwrap();
    let drifted = text.replacen("\"measured\": 0.0000000000000000e0", "\"measured\": 1.0000000000000000e0", 1);
    assert_ne!(drifted, text);
    let bad = d.join("drifted.json");
    std::fs::write(&bad, drifted).unwrap();
    let o = bin().arg("compare").arg(&json).arg("--current").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn output_directory_override() {
    let d = scratch("env");
    let o = bin().env("GQLAB_OUT_DIR", &d).args(["verify", "--suite", "grassmann", "--format", "csv"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.join("grassmann-seed42.csv").exists());
}
