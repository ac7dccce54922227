use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/specs")
}

fn ctdde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctdde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn spec(name: &str) -> String {
    specs().join(format!("{name}.json")).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

fn write_spec(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn simulate_sign_change_writes_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = ctdde(&[
        "simulate",
        &spec("sign_change"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    let t_right: f64 = value(&r, "detection.first_event.t_right")
        .unwrap()
        .parse()
        .unwrap();
    assert!((6.5..7.0).contains(&t_right));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,value,piece_index,provenance\n"));
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), r);
}

#[test]
fn simulate_example1_eventually_positive() {
    let o = ctdde(&["simulate", &spec("example1")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        value(&stdout(&o), "detection.eventually_positive"),
        Some("true")
    );
}

#[test]
fn zero_coefficient_repeats_history() {
    let dir = TempDir::new().unwrap();
    let p = write_spec(
        &dir,
        "zero.json",
        r#"{"label": "zero", "terms": [{"a": "0", "h": "t - 1"}],
            "history": {"expr": "1 + frac(t)", "start": -1}, "sim": {"T": 5, "Q": 8}}"#,
    );
    let out = dir.path().join("o");
    let o = ctdde(&["simulate", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (t, v): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert_eq!(v, 1.0 + t.rem_euclid(1.0), "t = {t}");
    }
}

#[test]
fn analyze_verdicts() {
    let cases = [
        ("ex1eq1", "NoPositiveSolutionUnderCond5", 0),
        ("ex3eq1", "PositiveSolutionExists", 0),
        ("burst", "NoPositiveNonincreasing", 0),
        ("example1", "Inconclusive", 3),
    ];
    for (name, verdict, code) in cases {
        let o = ctdde(&["analyze", &spec(name)]);
        assert_eq!(o.status.code(), Some(code), "{name}");
        assert_eq!(value(&stdout(&o), "verdict"), Some(verdict), "{name}");
    }
    let burst = stdout(&ctdde(&["analyze", &spec("burst")]));
    assert_eq!(value(&burst, "evidence.S"), Some("4.5"));
    assert_eq!(value(&burst, "evidence.t"), Some("18"));
}

#[test]
fn overrides_are_applied() {
    let o = ctdde(&["simulate", &spec("example1"), "--Q", "8", "--T", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    assert_eq!(value(&r, "Q"), Some("8"));
    assert_eq!(value(&r, "T"), Some("6"));
    let o = ctdde(&["envelopes", &spec("ex3eq1"), "--alpha-grid", "2"]);
    assert_eq!(value(&stdout(&o), "alphas"), Some("2"));
}

#[test]
fn envelopes_csv() {
    let dir = TempDir::new().unwrap();
    let o = ctdde(&[
        "envelopes",
        &spec("ex3eq1"),
        "--alpha-grid",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("envelopes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,k,a_low,a_high,hf_low,hf_high,mode,alpha")
    );
    // 41 rows per mode
    assert_eq!(lines.count(), 82);
}

#[test]
fn bound_ex3eq1() {
    let dir = TempDir::new().unwrap();
    let o = ctdde(&[
        "bound",
        &spec("ex3eq1"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "certificate.status"), Some("pass"));
    assert!(dir.path().join("bounds.csv").exists());
}

#[test]
fn schema_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write_spec(
        &dir,
        "bad.json",
        r#"{"label": "x", "terms": [{"a": "0.2 +", "h": "t"}]}"#,
    );
    let o = ctdde(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("terms[0].a"));
    let missing = dir.path().join("none.json");
    assert_eq!(
        ctdde(&["simulate", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ctdde(&["bound", &spec("example1")]).status.code(), Some(2));
    assert_eq!(
        ctdde(&["simulate", &spec("example1"), "--T", "2.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_error_exits_1() {
    let dir = TempDir::new().unwrap();
    // history starts too late for the delay
    let p = write_spec(
        &dir,
        "late.json",
        r#"{"label": "late", "terms": [{"a": "0.1", "h": "t - 3"}],
            "history": {"expr": "1", "start": -1}, "sim": {"T": 4, "Q": 8}}"#,
    );
    let o = ctdde(&["simulate", &p]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repro_full_run() {
    let dir = TempDir::new().unwrap();
    let o = ctdde(&["repro", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = stdout(&o);
    assert_eq!(value(&r, "passed"), Some("8"));
    assert_eq!(value(&r, "failed"), Some("none"));
    for name in [
        "example1",
        "decaying_minima",
        "sign_change",
        "ex1eq1",
        "ex3eq1",
        "example4",
        "groenwall",
        "burst",
    ] {
        let sub = fs::read_to_string(dir.path().join(format!("{name}.txt"))).unwrap();
        assert_eq!(value(&sub, "pass"), Some("true"), "{name}");
    }
}

#[test]
fn repro_only() {
    let o = ctdde(&["repro", "--only", "example4"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    assert_eq!(value(&r, "examples"), Some("example4"));
    assert!(!r.contains("burst."));
    assert_eq!(
        ctdde(&["repro", "--only", "example9"]).status.code(),
        Some(2)
    );
}

#[test]
fn repro_corrupted_spec_dir_names_the_example() {
    let dir = TempDir::new().unwrap();
    for entry in fs::read_dir(specs()).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    fs::write(dir.path().join("groenwall.json"), "{ not json").unwrap();
    let o = ctdde(&["repro", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(value(&stdout(&o), "failed"), Some("groenwall"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("groenwall"));
}

#[test]
fn reports_are_deterministic() {
    for args in [
        vec!["analyze".to_string(), spec("ex1eq1")],
        vec!["simulate".to_string(), spec("decaying_minima")],
        vec!["repro".to_string()],
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(ctdde(&args).stdout, ctdde(&args).stdout);
    }
}
