use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn policyscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_policyscope"))
        .args(args)
        .env_remove("POLICYSCOPE_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.path().join(name);
    let mut args = vec![
        "synth",
        "--episodes",
        "8",
        "--horizon",
        "60",
        "--seed",
        "7",
        "-o",
        path_str(&out),
    ];
    args.extend_from_slice(extra);
    let o = policyscope(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn synth_writes_requested_neurons() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ds.json");
    let o = policyscope(&[
        "synth",
        "--episodes",
        "20",
        "--horizon",
        "200",
        "--seed",
        "7",
        "--neurons",
        "quadrant,theta,theta_dot",
        "-o",
        path_str(&out),
    ]);
    assert!(o.status.success());
    let v = json(&fs::read(&out).unwrap());
    assert_eq!(v["neuron_ids"].as_array().unwrap().len(), 3);
    assert_eq!(v["episodes"].as_array().unwrap().len(), 20);
}

#[test]
fn synth_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a.json", &["--neurons", "quadrant,noisy:0.2:theta"]);
    let b = synth(&dir, "b.json", &["--neurons", "quadrant,noisy:0.2:theta"]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn zero_episodes_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = policyscope(&[
        "synth",
        "--episodes",
        "0",
        "-o",
        path_str(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn unknown_neuron_spec_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = policyscope(&[
        "synth",
        "--neurons",
        "wobble",
        "-o",
        path_str(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn interpret_writes_bundle_and_table() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let out = dir.path().join("out");
    let o = policyscope(&[
        "interpret",
        "-i",
        path_str(&ds),
        "--out-dir",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let bundle = json(&fs::read(out.join("interpretation.json")).unwrap());
    let surrogate = &bundle["config"]["surrogate"];
    assert_eq!(surrogate["max_depth"], 3);
    assert_eq!(surrogate["min_leaf_fraction"], 0.1);
    assert_eq!(surrogate["ccp_alpha"], 0.003);
    assert_eq!(bundle["interpreters"].as_array().unwrap().len(), 3);

    let table = fs::read_to_string(out.join("programs.md")).unwrap();
    assert!(table.starts_with("| Neuron | Logic Program |"));
    assert!(table.contains("| quadrant | 0: "));
    assert!(!table.contains("-0.00"));
}

#[test]
fn interpret_respects_neuron_subset() {
    let dir = TempDir::new().unwrap();
    let ds = synth(
        &dir,
        "ds.json",
        &["--neurons", "quadrant,theta,theta_dot,sum"],
    );
    let out = dir.path().join("out");
    let o = policyscope(&[
        "interpret",
        "-i",
        path_str(&ds),
        "--out-dir",
        path_str(&out),
        "--neurons",
        "0,3",
    ]);
    assert!(o.status.success());
    let bundle = json(&fs::read(out.join("interpretation.json")).unwrap());
    let labels: Vec<&str> = bundle["interpreters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["neuron"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["quadrant", "sum"]);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let o = policyscope(&[
        "interpret",
        "-i",
        path_str(&dir.path().join("nope.json")),
        "--out-dir",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"state_names\": [").unwrap();
    let o = policyscope(&["metrics", "-i", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_report_has_five_metrics() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let o = policyscope(&["metrics", "-i", path_str(&ds)]);
    assert!(o.status.success());
    let v = json(&o.stdout);
    for key in [
        "variance",
        "mig",
        "modularity",
        "path_accuracy",
        "logic_conflict",
    ] {
        assert!(v[key].is_number(), "{key} missing");
    }
    assert_eq!(v["config"]["n_bins"], 20);
}

#[test]
fn bins_flag_is_echoed() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let v20 = json(&policyscope(&["metrics", "-i", path_str(&ds)]).stdout);
    let v10 = json(&policyscope(&["metrics", "-i", path_str(&ds), "--bins", "10"]).stdout);
    assert_eq!(v10["config"]["n_bins"], 10);
    assert_ne!(v10["variance"], v20["variance"]);
}

#[test]
fn sweep_produces_nine_csv_rows() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let report = dir.path().join("sweep.csv");
    let o = policyscope(&[
        "metrics",
        "-i",
        path_str(&ds),
        "--sweep",
        "ccp=0.001,0.003,0.01",
        "leaf=0.01,0.1,0.2",
        "--report",
        "csv",
        "-o",
        path_str(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(
        lines[0],
        "ccp_alpha,min_leaf_fraction,variance,mig,modularity,path_accuracy,logic_conflict"
    );
    assert!(lines[1].starts_with("0.001,0.01,"));
    assert!(lines[9].starts_with("0.01,0.2,"));
}

#[test]
fn bad_sweep_axis_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let o = policyscope(&["metrics", "-i", path_str(&ds), "--sweep", "depth=1,2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn saved_interpretation_matches_fresh_fit() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let out = dir.path().join("out");
    assert!(policyscope(&[
        "interpret",
        "-i",
        path_str(&ds),
        "--out-dir",
        path_str(&out)
    ])
    .status
    .success());
    let fresh = policyscope(&["metrics", "-i", path_str(&ds)]);
    let saved = policyscope(&[
        "metrics",
        "-i",
        path_str(&ds),
        "--interpretation",
        path_str(&out.join("interpretation.json")),
    ]);
    assert!(saved.status.success());
    assert_eq!(fresh.stdout, saved.stdout);
}

#[test]
fn csv_dir_input_matches_json() {
    let dir = TempDir::new().unwrap();
    let js = synth(&dir, "ds.json", &[]);
    let csv = synth(&dir, "ds_csv", &["--format", "csv-dir"]);
    let a = policyscope(&["metrics", "-i", path_str(&js)]);
    let b = policyscope(&["metrics", "-i", path_str(&csv), "--format", "csv-dir"]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir, "ds.json", &[]);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_policyscope"))
            .args(["metrics", "-i", path_str(&ds)])
            .env("POLICYSCOPE_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(1));
}
