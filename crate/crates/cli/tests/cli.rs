use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rulecraft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulecraft"))
        .args(args)
        .env_remove("RULECRAFT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rulecraft(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = rulecraft(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn last_train_risk(log: &str) -> f64 {
    let line = log.lines().rev().find(|l| l.starts_with("round ")).unwrap();
    let field = line.split('\t').find_map(|f| f.strip_prefix("train_risk ")).unwrap();
    field.parse().unwrap()
}

#[test]
fn worked_example_risks() {
    let dir = TempDir::new().unwrap();
    let m = p(&dir, "m.json");
    let common = ["train", "--synthetic", "fig2", "--rules", "2", "--offset", "zero", "--out", &m];
    let mut args = common.to_vec();
    args.extend(["--objective", "ogb", "--update", "corrective"]);
    let r = last_train_risk(&ok(&args));
    assert!((r - 1.0 / 9.0).abs() <= 1e-12, "{r}");
    let mut args = common.to_vec();
    args.extend(["--objective", "gb", "--update", "stagewise"]);
    let r = last_train_risk(&ok(&args));
    assert!((r - 24.0 / 9.0).abs() <= 1e-12, "{r}");
}

#[test]
fn zero_rules_gives_offset_only_model() {
    let dir = TempDir::new().unwrap();
    let (m, data) = (p(&dir, "m.json"), p(&dir, "d.csv"));
    ok(&["gen-data", "--name", "friedman1", "--n", "50", "--out", &data]);
    ok(&["train", "--data", &data, "--rules", "0", "--out", &m]);
    assert!(fs::read_to_string(&m).unwrap().contains("\"rules\": []"));
    let pred = ok(&["predict", "--model", &m, "--data", &data]);
    let values: Vec<&str> = pred.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values.len(), 50);
    assert!(values.iter().all(|v| *v == values[0]));
}

#[test]
fn evaluate_reproduces_training_risk() {
    let dir = TempDir::new().unwrap();
    let (m, data) = (p(&dir, "m.json"), p(&dir, "d.csv"));
    ok(&["gen-data", "--name", "friedman1", "--n", "200", "--seed", "3", "--out", &data]);
    let log = ok(&["train", "--data", &data, "--rules", "4", "--search", "beam:3", "--out", &m]);
    let report = ok(&["evaluate", "--model", &m, "--data", &data]);
    let risk: f64 = report.lines().next().unwrap().strip_prefix("risk ").unwrap().parse().unwrap();
    assert_eq!(risk, last_train_risk(&log));
    assert_eq!(report.lines().filter(|l| l.starts_with("rule ")).count(), 4);
    assert!(report.contains("normalized_risk "));
}

#[test]
fn logistic_zero_output_predicts_one_half() {
    let dir = TempDir::new().unwrap();
    let (m, data) = (p(&dir, "m.json"), p(&dir, "d.csv"));
    fs::write(
        &m,
        r#"{"format_version": 1, "loss": "logistic", "offset": 0.0, "feature_names": ["a"], "rules": []}"#,
    )
    .unwrap();
    fs::write(&data, "a\n1\n2\n").unwrap();
    let pred = ok(&["predict", "--model", &m, "--data", &data]);
    assert_eq!(pred, "f,prediction\n0,0.5\n0,0.5\n");
}

#[test]
fn feature_mismatch_is_a_data_error_naming_columns() {
    let dir = TempDir::new().unwrap();
    let (m, data, other) = (p(&dir, "m.json"), p(&dir, "d.csv"), p(&dir, "o.csv"));
    ok(&["gen-data", "--name", "fig2", "--out", &data]);
    ok(&["train", "--data", &data, "--rules", "1", "--out", &m]);
    fs::write(&other, "z,y\n1,2\n").unwrap();
    let (c, err) = code(&["predict", "--model", &m, "--data", &other]);
    assert_eq!(c, 3);
    assert!(err.contains("x1"), "{err}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let (m, data, bad) = (p(&dir, "m.json"), p(&dir, "d.csv"), p(&dir, "bad.csv"));
    ok(&["gen-data", "--name", "fig2", "--out", &data]);
    // configuration
    assert_eq!(code(&["train", "--data", &data, "--epsilon", "-1", "--out", &m]).0, 2);
    assert_eq!(code(&["train", "--data", &data, "--search", "beam:0", "--out", &m]).0, 2);
    assert_eq!(code(&["bound-study", "--points", "30", "--instances", "1"]).0, 2);
    assert_eq!(code(&["gen-data", "--name", "nope", "--out", &data]).0, 2);
    // data
    assert_eq!(code(&["train", "--data", &data, "--target", "missing", "--out", &m]).0, 3);
    fs::write(&bad, "x1,y\n1,abc\n").unwrap();
    let (c, err) = code(&["train", "--data", &bad, "--out", &m]);
    assert_eq!(c, 3);
    assert!(err.contains("row 1") && err.contains("abc"), "{err}");
    fs::write(&bad, "x1,y\n1,0.5\n").unwrap();
    assert_eq!(code(&["train", "--data", &bad, "--task", "binary", "--out", &m]).0, 3);
    fs::write(&bad, "{\"format_version\": 7}").unwrap();
    assert_eq!(code(&["predict", "--model", &bad, "--data", &data]).0, 3);
    assert!(!Path::new(&m).exists());
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_rulecraft"))
        .args(["bound-study", "--instances", "2", "--points", "6", "--existing-rules", "2"])
        .env("RULECRAFT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_rulecraft"))
        .args(["bound-study", "--instances", "2", "--points", "6", "--existing-rules", "2"])
        .env("RULECRAFT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn tradeoff_curve() {
    let dir = TempDir::new().unwrap();
    let (data, a, b) = (p(&dir, "d.csv"), p(&dir, "a.csv"), p(&dir, "b.csv"));
    ok(&["gen-data", "--name", "friedman1", "--n", "300", "--out", &data]);
    let before = fs::read(&data).unwrap();
    let args = |out: &str| {
        vec![
            "tradeoff".to_string(),
            "--data".into(),
            data.clone(),
            "--methods".into(),
            "gb:stagewise,ogb:corrective".into(),
            "--max-complexity".into(),
            "20".into(),
            "--seed".into(),
            "4".into(),
            "--out".into(),
            out.to_string(),
        ]
    };
    let run = |out: &str| {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(&a);
    run(&b);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(fs::read(&data).unwrap(), before);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,k,complexity,lambda,train_risk_norm,test_risk_norm,seconds"
    );
    let mut methods = std::collections::BTreeSet::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        methods.insert(f[0].to_string());
        assert!(f[2].parse::<usize>().unwrap() <= 20);
        if f[1] == "0" {
            assert_eq!(f[4].parse::<f64>().unwrap(), 1.0);
        }
    }
    assert_eq!(methods.len(), 2);
}

#[test]
fn bound_study_shapes() {
    let out = ok(&["bound-study", "--instances", "1", "--epsilons", "1"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "method,rate,eps_1");
    for line in lines {
        let last = line.rsplit(',').next().unwrap();
        assert!(last == "0" || last == "1", "{line}");
    }
}

#[test]
fn coverage_table() {
    let out = ok(&["coverage", "--synthetic", "fig2", "--rounds", "2", "--offset", "zero"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "round,base_coverage,ogb_coverage");
    assert_eq!(lines.count(), 2);
}

#[test]
fn gen_data_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    ok(&["gen-data", "--name", "friedman2", "--n", "20", "--seed", "9", "--out", &a]);
    ok(&["gen-data", "--name", "friedman2", "--n", "20", "--seed", "9", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 2, "temporary files left behind");
}

#[test]
fn help_documents_flags() {
    let help = ok(&["train", "--help"]);
    for flag in [
        "--data",
        "--target",
        "--task",
        "--loss",
        "--objective",
        "--update",
        "--search",
        "--epsilon",
        "--lambda",
        "--cv",
        "--rules",
        "--max-complexity",
        "--seed",
        "--out",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}
