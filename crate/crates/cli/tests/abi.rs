//! The binary's interface: flags, exit codes and output files.

use std::path::PathBuf;
use std::process::{Command, Output};

use ratio_rmt_std::format::parse_ratios;

fn ratio_rmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratio-rmt")).args(args).output().expect("run ratio-rmt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ratio_rmt(&["pdf", "--beta", "2", "--k", "1.5"])), 2);
    assert_eq!(code(&ratio_rmt(&["pdf", "--beta", "3", "--k", "0.5"])), 2);
    assert_eq!(code(&ratio_rmt(&["simulate", "--beta", "1", "--k", "0.5"])), 2);
    assert_eq!(code(&ratio_rmt(&["frobnicate"])), 2);
}

#[test]
fn pdf_table_has_provenance_and_rows() {
    let out = ratio_rmt(&["pdf", "--beta", "2", "--k", "0.5", "--r-min", "0.5", "--r-max", "2", "--points", "4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("# ratio-rmt "));
    assert!(text.lines().any(|l| l.starts_with("# spec-hash: ") && l.len() == "# spec-hash: ".len() + 64));
    assert!(text.contains("\nr,pdf\n"));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "r,pdf")
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].0, 0.5);
    assert_eq!(rows[3].0, 2.0);
    // inversion symmetry between the end points
    assert!((rows[0].1 - rows[3].1 * 4.0).abs() < 1e-6);

    let json = ratio_rmt(&["pdf", "--beta", "2", "--k", "0.5", "--points", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!((v["normalization"]["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn simulate_is_reproducible_and_parses_back() {
    let a = ratio_rmt(&["simulate", "--beta", "2", "--k", "0.3", "--n", "2000", "--seed", "5"]);
    let b = ratio_rmt(&["simulate", "--beta", "2", "--k", "0.3", "--n", "2000", "--seed", "5"]);
    let c = ratio_rmt(&["simulate", "--beta", "2", "--k", "0.3", "--n", "2000", "--seed", "6"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let ratios = parse_ratios(&stdout(&a)).unwrap();
    assert_eq!(ratios.len(), 2000);
    assert!(stdout(&a).contains("# seed: 5\n"));

    let wide = ratio_rmt(&["simulate", "--beta", "1", "--k", "1.2", "--n", "10"]);
    assert_eq!(code(&wide), 0);
    assert!(String::from_utf8_lossy(&wide.stderr).contains("warning"));
}

#[test]
fn fit_exit_codes_and_small_sample_flag() {
    let empty = scratch("empty-ratios.txt", "# nothing here\n");
    assert_eq!(code(&ratio_rmt(&["fit", empty.to_str().unwrap(), "--beta", "2"])), 2);
    let missing = ratio_rmt(&["fit", "/nonexistent/ratios.txt", "--beta", "2"]);
    assert_eq!(code(&missing), 2);
    let bad = scratch("bad-ratios.txt", "0.5\nx\n");
    assert_eq!(code(&ratio_rmt(&["fit", bad.to_str().unwrap(), "--beta", "2"])), 2);

    let ten = scratch("ten-ratios.txt", "0.3\n0.8\n1.1\n0.5\n2.4\n0.9\n1.7\n0.6\n1.3\n0.45\n");
    let out = ratio_rmt(&["fit", ten.to_str().unwrap(), "--beta", "2", "--bootstrap", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["small_sample"], true);
    assert_eq!(v["result"]["n_used"], 10);
    let k = v["result"]["k_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&k));
    assert!(v["result"]["ci_low"].as_f64().unwrap() <= k && k <= v["result"]["ci_high"].as_f64().unwrap());
    assert!(String::from_utf8_lossy(&out.stderr).contains("small sample"));
}

#[test]
fn ingest_examples() {
    let four = scratch("four-levels.csv", "energy,localized\n0,0\n1,1\n3,0\n4,0\n");
    let out = ratio_rmt(&["ingest", four.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(parse_ratios(&stdout(&out)).unwrap(), vec![2.0, 0.5]);
    let out = ratio_rmt(&["ingest", four.to_str().unwrap(), "--mode", "centered"]);
    assert_eq!(parse_ratios(&stdout(&out)).unwrap(), vec![2.0]);

    let plain = scratch("no-localized.csv", "energy,localized\n0,0\n1,0\n3,0\n4,0\n");
    let out = ratio_rmt(&["ingest", plain.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(parse_ratios(&stdout(&out)).unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no localized levels"));
    let out = ratio_rmt(&["ingest", plain.to_str().unwrap(), "--generic"]);
    assert_eq!(parse_ratios(&stdout(&out)).unwrap(), vec![2.0, 0.5]);

    let entropies = scratch("entropies.csv", "energy,entropy\n0,6.0\n1,2.0\n3,6.1\n4,5.9\n");
    assert_eq!(code(&ratio_rmt(&["ingest", entropies.to_str().unwrap()])), 2);
    let out = ratio_rmt(&["ingest", entropies.to_str().unwrap(), "--entropy-threshold", "3"]);
    assert_eq!(parse_ratios(&stdout(&out)).unwrap(), vec![2.0, 0.5]);
    assert!(stdout(&out).contains("# entropy-threshold: 3.0000000000000000e0\n"));

    let dup = scratch("duplicate.csv", "energy,localized\n0,0\n1,1\n1,0\n");
    let out = ratio_rmt(&["ingest", dup.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn tampered_fixtures_fail_validation() {
    let text = ratio_rmt_std::validate::DEFAULT_FIXTURES;
    let mut fixtures: Vec<serde_json::Value> = serde_json::from_str(text).unwrap();
    let v = fixtures[0]["value"].as_f64().unwrap();
    fixtures[0]["value"] = (v + 1e-3).into();
    let path = scratch("tampered.json", &serde_json::to_string(&fixtures).unwrap());
    let out = ratio_rmt(&["validate", "--fixtures", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).lines().any(|l| l.starts_with("fixture/") && l.contains(",FAIL,")));
}
