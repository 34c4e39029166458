use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hcx(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcx"))
        .env("HCX_CACHE_DIR", cache)
        .args(args)
        .output()
        .expect("run hcx")
}

fn json_line(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

#[test]
fn exact_counts_and_partition_function() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_line(&hcx(dir.path(), &["exact-z", "2", "1"]));
    assert_eq!(v["result"]["Z"], "7");
    let v = json_line(&hcx(dir.path(), &["ivalue", "4"]));
    assert_eq!(v["result"]["independent_sets"], "743");
    assert_eq!(v["cache"]["exact_table"], "miss");
    assert!(dir.path().join("exact/d4.json").exists());
    let v = json_line(&hcx(dir.path(), &["ivalue", "4"]));
    assert_eq!(v["cache"]["exact_table"], "hit");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hcx(dir.path(), &["lk", "9"]).status.code(), Some(2));
    assert_eq!(hcx(dir.path(), &["exact-z", "7", "1"]).status.code(), Some(3));
    assert_eq!(hcx(dir.path(), &["exact-z", "3", "-1"]).status.code(), Some(2));
    let err = hcx(dir.path(), &["lk", "9"]).stderr;
    let v: Value = serde_json::from_slice(&err).unwrap();
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn lk_at_lambda_one_is_symbolic() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_line(&hcx(dir.path(), &["lk", "2", "--at-lambda", "1"]));
    assert_eq!(v["result"]["value"], "(3d^2 - 3d - 2)/8 * 2^-d");
    assert_eq!(v["config"]["k"], 2);
    assert!(dir.path().join("lk/k2.json").exists());
}

#[test]
fn approx_z_reports_bound_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_line(&hcx(dir.path(), &["approx-z", "20", "1", "2"]));
    let r = &v["result"];
    assert_eq!(r["L_exact"][0], "1/2");
    assert_eq!(r["L_values"].as_array().unwrap().len(), 2);
    assert!(r["error_bound_form"]["value"].as_f64().unwrap() > 0.0);
    assert!(r["validity_flag"].is_boolean());
}

#[test]
fn sample_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, engine) in [(&a, "exact"), (&b, "exact")] {
        let v = json_line(&hcx(dir.path(), &["sample", "4", "1", "500", "11", "--engine", engine, "--out", path.to_str().unwrap()]));
        assert_eq!(v["config"]["seed"], 11);
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with(b"sample,type_id,size,count\n"));

    let g1 = dir.path().join("g1.csv");
    let g2 = dir.path().join("g2.csv");
    for path in [&g1, &g2] {
        json_line(&hcx(dir.path(), &["sample", "8", "1", "50", "3", "--engine", "glauber", "--out", path.to_str().unwrap()]));
    }
    assert_eq!(std::fs::read(&g1).unwrap(), std::fs::read(&g2).unwrap());
}

#[test]
fn defect_reports() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_line(&hcx(dir.path(), &["defects", "3"]));
    assert_eq!(v["result"]["count"], 2);
    let v = json_line(&hcx(dir.path(), &["defects", "--threshold", "1", "0", "20"]));
    assert!((v["result"]["lambda_t"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let out = hcx(dir.path(), &["defects", "--stats", "20", "1", "--t-max", "2"]);
    assert_eq!(json_line(&out)["result"]["m_T"]["exact"], "1/2");
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}
