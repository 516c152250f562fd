use serde_json::{json, Value};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hessquot(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessquot"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn thresholds_config(expected_alpha2: f64) -> Value {
    json!({
        "schema": 1,
        "id": "thr",
        "seed": 0,
        "params": {"n": 3, "k": 2, "l": 0, "m": 3},
        "checks": [
            {"check": "alpha1", "expected": -1.0, "tolerance": 1e-10},
            {"check": "alpha2", "expected": expected_alpha2, "tolerance": 1e-10}
        ]
    })
}

fn csv_header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn bundled_scenarios_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = hessquot(
        dir.path(),
        &[
            "run",
            "l0_thresholds",
            "special_lagrangian",
            "anisotropic_barriers",
            "resonant_decay",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for id in [
        "l0_thresholds",
        "special_lagrangian",
        "anisotropic_barriers",
        "resonant_decay",
    ] {
        let report: Value =
            serde_json::from_slice(&fs::read(dir.path().join(id).join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["pass"], json!(true), "{id}");
        assert_eq!(report["schema"], json!(1));
    }
}

#[test]
fn report_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        for cmd in ["run", "barriers", "verify"] {
            let out = hessquot(d.path(), &[cmd, "anisotropic_barriers"]);
            assert_eq!(out.status.code(), Some(0), "{cmd}");
        }
    }
    for file in [
        "report.json",
        "h.csv",
        "h0.csv",
        "envelope.json",
        "verify.json",
    ] {
        let x = fs::read(a.path().join("anisotropic_barriers").join(file)).unwrap();
        let y = fs::read(b.path().join("anisotropic_barriers").join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "thr.json", &thresholds_config(2.5));
    let out = hessquot(dir.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value =
        serde_json::from_slice(&fs::read(dir.path().join("thr/report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["pass"], json!(true));
    assert_eq!(report["checks"][1]["pass"], json!(false));
    assert!(report["checks"][1]["worst_margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value =
        serde_json::from_str(include_str!("../scenarios/resonant_decay.json")).unwrap();
    cfg["envelope"] = json!({"g0": {"kind": "constant", "value": 1.0}, "c1": 0.1, "beta": 1.5});
    let path = write_config(dir.path(), "bad.json", &cfg);
    let out = hessquot(dir.path(), &["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta > 2"));

    let out = hessquot(
        dir.path(),
        &["thresholds", "--n", "3", "--k", "4", "--l", "0"],
    );
    assert_eq!(out.status.code(), Some(2));

    let path = write_config(
        dir.path(),
        "typo.json",
        &json!({"schema": 1, "id": "x", "params": {"n": "three"}}),
    );
    let out = hessquot(dir.path(), &["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.n"));
}

#[test]
fn numeric_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value =
        serde_json::from_str(include_str!("../scenarios/resonant_decay.json")).unwrap();
    cfg["decay"]["fit"]["r_hi"] = json!(100.0);
    let path = write_config(dir.path(), "narrow.json", &cfg);
    let out = hessquot(dir.path(), &["asymptotics", &path]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn io_failure_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = hessquot(&blocker.join("sub"), &["run", "special_lagrangian"]);
    assert_eq!(out.status.code(), Some(4));
    let out = hessquot(dir.path(), &["run", "no/such/config.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = hessquot(
        dir.path(),
        &[
            "radial", "--n", "3", "--k", "2", "--l", "0", "--m", "3", "--alpha", "0.5",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        csv_header(&dir.path().join("profiles.csv")),
        "r,u,du,U,residual"
    );

    let out = hessquot(dir.path(), &["dim2", "--rho", "0.5", "--b", "0.7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_header(&dir.path().join("dim2.csv")), "r,u,du,remainder");

    let out = hessquot(dir.path(), &["profiles", "anisotropic_barriers"]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["h.csv", "big_h.csv", "h0.csv"] {
        let header = csv_header(&dir.path().join("anisotropic_barriers").join(f));
        assert_eq!(header, "r,value,deriv,bound_low,bound_high,residual");
    }

    let out = hessquot(dir.path(), &["asymptotics", "resonant_decay"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        csv_header(&dir.path().join("resonant_decay/decay.csv")),
        "r,e,model_power,model_logpower"
    );
}
