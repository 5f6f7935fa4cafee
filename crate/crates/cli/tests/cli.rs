use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ftn_core::verify::Report;

fn ftn(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ftn"));
    cmd.args(args);
    match cache {
        Some(dir) => cmd.env("FTN_CACHE", dir),
        None => cmd.arg("--no-cache"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SINGLETON: &str = r#"{"schema":"ftn/1","tuple":{"items":[[[[2,0]]]]}}"#;
const PAIR: &str = r#"{"schema":"ftn/1","tuple":{"items":[
    [[[1,0],[0,0]],[[0,0],[0,0]]],
    [[[0,0],[1,0]],[[0,0],[0,0]]]]}}"#;

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn decnorm_prints_value_and_certificate_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", PAIR);
    let out = dir.path().join("cert.json");
    let o = ftn(&["decnorm", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains(&format!("certificate {}", out.display())), "{text}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    // The matrix-unit row e_11, e_12 has factorization norm √2.
    let v = doc["value"].as_f64().unwrap();
    assert!((v - 2f64.sqrt()).abs() < 1e-6, "{v}");
    assert_eq!(doc["check"]["valid"], serde_json::Value::Bool(true));
}

#[test]
fn minnorm_writes_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", PAIR);
    let trace = dir.path().join("trace.csv");
    let o = ftn(
        &["minnorm", "--in", input.to_str().unwrap(), "--dims", "1,2,4", "--restarts", "64", "--trace", trace.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dimension,restart,best_value,upper_bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), vec![1, 2, 4]);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
    let upper = rows[0][3];
    assert!((rows[2][2] - upper).abs() <= 1e-3 * upper);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc["relative_gap"].as_f64().unwrap() < 1e-3);
}

#[test]
fn singleton_trace_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", SINGLETON);
    let trace = dir.path().join("trace.csv");
    let o = ftn(&["minnorm", "--in", input.to_str().unwrap(), "--trace", trace.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(&trace).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "{csv}");
    let f: Vec<f64> = rows[0].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((f[2] - 2.0).abs() < 1e-12);
    assert!((f[3] - 2.0).abs() < 1e-8);
}

#[test]
fn empty_schedule_creates_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", PAIR);
    let trace = dir.path().join("trace.csv");
    let o = ftn(&["minnorm", "--in", input.to_str().unwrap(), "--dims", "", "--trace", trace.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!trace.exists());
    let doc = r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]]]},"config":{"dims":[]}}"#;
    let input = write(dir.path(), "e.json", doc);
    let o = ftn(&["minnorm", "--in", input.to_str().unwrap(), "--trace", trace.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!trace.exists());
}

#[test]
fn input_errors_exit_two_with_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]]],"unit_index":3}}"#, "E_INDEX"),
        (r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0,0]]]]}}"#, "E_COMPLEX"),
        (r#"{"schema":"other","tuple":{"items":[[[[1,0]]]]}}"#, "E_SCHEMA"),
        (r#"{"schema":"ftn/1","tuple":{"items":[[[[1,0]]], [[[1,0],[0,0]],[[0,0],[1,0]]]]}}"#, "E_DIM"),
        (r#"{"schema":"ftn/1","tuple":{}}"#, "E_MISSING"),
        ("not json", "E_PARSE"),
    ];
    for (i, (doc, code)) in cases.iter().enumerate() {
        let input = write(dir.path(), &format!("bad{i}.json"), doc);
        let o = ftn(&["decnorm", "--in", input.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{doc}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(code), "{doc}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = ftn(&["decnorm"], None);
    assert_eq!(o.status.code(), Some(2));
    let input = write(dir.path(), "el.json", r#"{"schema":"ftn/1","element":{"terms":[[[[[1,0]]],[[[1,0]]]]]}}"#);
    let o = ftn(&["decnorm", "--in", input.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", PAIR);
    let o = ftn(&["decnorm", "--in", input.to_str().unwrap(), "--max-iter", "1"], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E_SOLVER"));
}

#[test]
fn cache_hit_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let input = write(dir.path(), "t.json", PAIR);
    let args = ["minnorm", "--in", input.to_str().unwrap(), "--seed", "5", "--restarts", "8"];
    let cold = ftn(&args, Some(&cache));
    assert_eq!(cold.status.code(), Some(0));
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
    let warm = ftn(&args, Some(&cache));
    assert_eq!(cold.stdout, warm.stdout);
    let uncached = ftn(&args, None);
    assert_eq!(cold.stdout, uncached.stdout);
    // A different seed is a different entry.
    let other = ftn(&["minnorm", "--in", input.to_str().unwrap(), "--seed", "6", "--restarts", "8"], Some(&cache));
    assert_eq!(other.status.code(), Some(0));
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 2);
}

#[test]
fn hnorm_column_element() {
    let dir = tempfile::tempdir().unwrap();
    // e_11 ⊗ e_11 + e_12 ⊗ e_21 has Haagerup norm 2.
    let doc = r#"{"schema":"ftn/1","element":{"terms":[
        [[[[1,0],[0,0]],[[0,0],[0,0]]], [[[1,0],[0,0]],[[0,0],[0,0]]]],
        [[[[0,0],[1,0]],[[0,0],[0,0]]], [[[0,0],[0,0]],[[1,0],[0,0]]]]]}}"#;
    let input = write(dir.path(), "h.json", doc);
    let o = ftn(&["hnorm", "--in", input.to_str().unwrap(), "--samples", "50"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["upper"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((v["lower"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn cpext_reports_obstruction_and_conjugation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{"schema":"ftn/1","extension":{"unitaries":[[[[0,1],[0,0]],[[0,0],[0,-1]]]],"images":[[[[1,0]]]]}}"#;
    let input = write(dir.path(), "bad.json", bad);
    let o = ftn(&["cpext", "--in", input.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["extension"]["Infeasible"]["separating_value"].as_f64().unwrap() > 1e-8);
    assert_eq!(v["hom_check"]["verdict"], "NoCpExtension");

    let good = r#"{"schema":"ftn/1","extension":{"unitaries":[[[[1,0],[0,0]],[[0,0],[-1,0]]]],"images":[[[[0,0],[1,0]],[[1,0],[0,0]]]]}}"#;
    let input = write(dir.path(), "good.json", good);
    let o = ftn(&["cpext", "--in", input.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["hom_check"]["verdict"], "Pass");
    assert!(v["extension"]["Feasible"]["choi"]["matrix"].is_array());
}

fn strip_timing(text: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn verify_is_deterministic_and_round_trips() {
    let args = ["verify", "--suite", "lemma4,prop6", "--count", "3", "--seed", "7"];
    let a = ftn(&args, None);
    let b = ftn(&args, None);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(strip_timing(&stdout(&a)), strip_timing(&stdout(&b)));
    let report: Report = serde_json::from_str(&stdout(&a)).unwrap();
    assert!(report.timing.is_some());
    assert_eq!(report.suites.len(), 2);
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, stdout(&a));
}

#[test]
fn verify_negative_control_exits_one() {
    let o = ftn(&["verify", "--suite", "lemma4", "--count", "10", "--tol", "1e-12", "--seed", "7"], None);
    assert_eq!(o.status.code(), Some(1));
    let report: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!report.aggregate_pass);
    let s = &report.suites[0];
    assert_eq!(s.tolerance, 1e-12);
    let worst = &s.records[s.worst.unwrap()];
    assert_eq!(worst.violation, s.max_violation);
}

#[test]
fn unknown_suite_is_usage_error() {
    let o = ftn(&["verify", "--suite", "nope"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_csv() {
    let o = ftn(&["bench", "--dims", "1,2", "--count", "1", "--items", "2", "--restarts", "4", "--format", "csv"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("k,n,index,upper,lower,relative_gap,dec_seconds,sup_seconds\n"));
    assert_eq!(text.lines().count(), 3);
}
