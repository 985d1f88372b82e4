use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nbfec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbfec"))
        .args(args)
        .env_remove("NBFEC_WORKERS")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nbfec(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// `metric,value` rows as pairs.
fn rows(csv: &str) -> Vec<(String, String)> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|l| l.split_once(',').map(|(a, b)| (a.to_string(), b.to_string())))
        .collect()
}

fn value(csv: &str, key: &str) -> f64 {
    rows(csv).into_iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no `{key}` row")).1.parse().unwrap()
}

#[test]
fn analyze_toy_database_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let db = tmp.path().join("toy.csv");
    let mut text = String::from("# constellation=8psk M=8 N=10\ntx_index,rx_i,rx_q\n");
    for i in 0..10usize {
        let a = std::f64::consts::PI / 4.0 * i as f64;
        text.push_str(&format!("{},{},{}\n", i % 8, a.cos() + 0.05, a.sin() - 0.03));
    }
    fs::write(&db, text).unwrap();
    let out = tmp.path().join("out");
    ok(&["analyze", "--db", db.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = read(&out, "metrics.csv");
    assert!(csv.starts_with("# units:"));
    let keys: Vec<String> = rows(&csv).into_iter().map(|r| r.0).collect();
    for k in ["i_nb_bits", "nu_hat", "sigma2_hat", "gmi_bits", "aclb_bits", "pre_fec_ber", "pre_fec_ser"] {
        assert!(keys.iter().any(|x| x == k), "missing {k} in {keys:?}");
    }
    assert_eq!(value(&csv, "samples"), 10.0);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "analyze");
    assert_eq!(manifest["outputs"][0], "metrics.csv");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = out.to_str().unwrap();
    let args = [
        "--workers", "2", "simulate", "--constellation", "c2", "--esn0", "8:0.25:8.5", "--seed", "4",
        "--max-frames", "32", "--out", o,
    ];
    let files = ["simulate.csv", "curves.csv", "manifest.json"];
    ok(&args);
    let first: Vec<String> = files.iter().map(|f| read(&out, f)).collect();
    ok(&args);
    let second: Vec<String> = files.iter().map(|f| read(&out, f)).collect();
    assert_eq!(first, second);
    assert_eq!(first[0].lines().filter(|l| l.starts_with("c2,")).count(), 3);
    assert!(first[1].contains("pre_fec_ser") && first[1].contains("mi_bits"));
}

#[test]
fn predict_interpolates_log_linearly() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = tmp.path().join("curve.csv");
    fs::write(&curve, "# code=toy\n# target_ser=1e-3\nmi_bits,post_fec_ser\n2.5,1e-2\n2.6,1e-4\n").unwrap();
    let out = tmp.path().join("p");
    ok(&["predict", "--curve", curve.to_str().unwrap(), "--mi", "2.55,2.6", "--out", out.to_str().unwrap()]);
    let csv = read(&out, "prediction.csv");
    let data: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("mi_bits"))
        .map(|l| l.split(',').take(6).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!((data[0][1] / 1e-3 - 1.0).abs() < 1e-9);
    assert_eq!(data[1][1], 1e-4);
}

#[test]
fn bad_input_exits_nonzero_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = nbfec(&["simulate", "--no-such-flag"]);
    assert!(!unknown.status.success());
    assert!(!unknown.stderr.is_empty());

    let missing = nbfec(&["analyze", "--db", "/nonexistent/db.csv", "--out", tmp.path().to_str().unwrap()]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));

    let grid = nbfec(&["simulate", "--constellation", "8psk", "--esn0", "5:0:1", "--seed", "1", "--out", tmp.path().to_str().unwrap()]);
    assert!(!grid.status.success());
}

#[test]
fn calibrate_rate_08_lands_in_band() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cal");
    let o = ok(&[
        "calibrate", "--rate", "0.8", "--target-ser", "1e-3", "--extrapolate-to", "1e-4", "--seed", "1",
        "--max-frames", "600", "--out", out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("threshold_bits="));
    let t = read(&out, "threshold.csv");
    let at_1e3 = value(&t, "threshold_bits");
    let at_1e4 = value(&t, "extrapolated_threshold_bits");
    assert!((at_1e4 - 2.55).abs() <= 0.15, "T(1e-4) = {at_1e4}");
    assert!(at_1e3 < at_1e4 && at_1e4 - at_1e3 < 0.1);
    assert!(read(&out, "curve.csv").contains("# code=qc-m3-dv3-dc15"));
}
