use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn timebin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timebin"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = timebin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn golden_headers() {
    let cases = [
        (
            "distribute",
            "trials,successes,empirical,std_err,ci_low,ci_high,analytic,fidelity_min,fidelity_mean,fidelity_max,seed",
        ),
        (
            "repeater",
            "trials,segment_a_rate,segment_a_std_err,segment_b_rate,segment_b_std_err,bsm_attempts,bsm_rate,\
             bsm_std_err,end_to_end_rate,end_to_end_std_err,fidelity_min,fidelity_mean,p_pur_a,p_pur_b,\
             swap_success_prob,analytic_end_to_end,seed",
        ),
        (
            "sweep",
            "param,value,target,trials,empirical,std_err,analytic,fidelity_min,p_pur_kwd,p_pur,log10_ratio",
        ),
        ("compare-kwd", "eta,p_pur_kwd,p_pur,ratio,log10_ratio"),
    ];
    for (cmd, header) in cases {
        let text = stdout_ok(&[cmd, "--trials", "2000"]);
        assert_eq!(text.lines().next().unwrap(), header, "{cmd}");
    }
}

#[test]
fn sweep_over_theta_tracks_cos4() {
    let text = stdout_ok(&["sweep", "--trials", "5000", "--check"]);
    let table = rows(&text);
    assert_eq!(table.len(), 6);
    let (v, a) = (column(&table, "value"), column(&table, "analytic"));
    for row in &table[1..] {
        let theta: f64 = row[v].parse().unwrap();
        let analytic: f64 = row[a].parse().unwrap();
        assert!((analytic - theta.cos().powi(4)).abs() < 1e-12, "{theta}: {analytic}");
    }
}

#[test]
fn two_step_sweep_emits_two_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"kind": "sweep", "trials": 3000,
            "sweep": {"param": "eta", "lo": 0.3, "hi": 0.8, "steps": 2, "target": "repeater"}}"#,
    );
    let table = rows(&stdout_ok(&["sweep", "--config", &cfg]));
    assert_eq!(table.len(), 3);
    let kwd = column(&table, "p_pur_kwd");
    let low: f64 = table[1][kwd].parse().unwrap();
    let high: f64 = table[2][kwd].parse().unwrap();
    assert!(low < high);
    assert_eq!(table[1][column(&table, "target")], "repeater");
}

#[test]
fn compare_kwd_endpoints() {
    let table = rows(&stdout_ok(&["compare-kwd", "--check"]));
    assert_eq!(table.len(), 3);
    let kwd = column(&table, "p_pur_kwd");
    let low: f64 = table[1][kwd].parse().unwrap();
    let high: f64 = table[2][kwd].parse().unwrap();
    assert!((low - 7.566806425781248e-8).abs() < 1e-20);
    assert!((high - 1.934917632e-4).abs() < 1e-15);
    let p: f64 = table[1][column(&table, "p_pur")].parse().unwrap();
    assert_eq!(p, 0.1125);
}

#[test]
fn same_seed_gives_identical_bytes() {
    for cmd in ["distribute", "repeater", "sweep"] {
        let a = timebin(&[cmd, "--trials", "4000", "--seed", "7"]).stdout;
        let b = timebin(&[cmd, "--trials", "4000", "--seed", "7"]).stdout;
        assert_eq!(a, b, "{cmd}");
        let c = timebin(&[cmd, "--trials", "4000", "--seed", "8"]).stdout;
        assert_ne!(a, c, "{cmd}");
    }
}

#[test]
fn json_output_with_fixed_epoch() {
    let text = stdout_ok(&["distribute", "--trials", "1000", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["timestamp"], "1970-01-01T00:00:00Z");
    assert_eq!(v["config"]["kind"], "distribute");
    assert_eq!(v["stats"]["trials"], 1000);
    assert!(v["analytic"]["end_to_end"].as_f64().is_some());
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rates.csv");
    let out = timebin(&["compare-kwd", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(Path::new(&path)).unwrap();
    assert!(written.starts_with("eta,"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let malformed = write_config(&dir, "bad.json", "{ not json");
    assert_eq!(timebin(&["distribute", "--config", &malformed]).status.code(), Some(2));

    let mismatch = write_config(&dir, "rep.json", r#"{"kind": "repeater"}"#);
    assert_eq!(timebin(&["distribute", "--config", &mismatch]).status.code(), Some(2));

    let bad_value = write_config(&dir, "eta.json", r#"{"kind": "repeater", "repeater": {"eta": 2}}"#);
    assert_eq!(timebin(&["repeater", "--config", &bad_value]).status.code(), Some(2));

    let off_reference = write_config(&dir, "cmp.json", r#"{"kind": "compare-kwd", "repeater": {"zeta": 0.2}}"#);
    assert_eq!(timebin(&["compare-kwd", "--config", &off_reference, "--check"]).status.code(), Some(0));

    // One trial has zero standard error, so any rate other than 0 or 1 fails the check.
    let quarter = write_config(
        &dir,
        "dist.json",
        r#"{"kind": "distribute", "trials": 1, "channels": [{"theta": {"fixed": "deg:45"}}]}"#,
    );
    assert_eq!(timebin(&["distribute", "--config", &quarter, "--check"]).status.code(), Some(1));
    assert_eq!(timebin(&["distribute", "--config", &quarter]).status.code(), Some(0));
    assert_eq!(timebin(&["distribute", "--trials", "0"]).status.code(), Some(2));
}
