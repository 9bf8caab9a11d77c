//! End-to-end runs of the binary: generate, discover, evaluate, bench and
//! project, plus config-file precedence and input-error exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pctmi"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pctmi-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Small and fast but statistically easy settings for a fork at T=400.
fn fast_flags(cmd: &mut Command) -> &mut Command {
    cmd.args(["--max-window", "2", "--max-lag", "2", "--permutations", "30", "--min-samples", "30"])
}

#[test]
fn generate_discover_evaluate_round_trip() {
    let dir = tempdir("roundtrip");
    let data = dir.join("data.csv");
    let truth = dir.join("truth.json");
    let pred = dir.join("pred.json");

    run(bin().args(["generate", "--structure", "fork", "--t-len", "400", "--seed", "3"]).args([
        "--data-out",
        data.to_str().unwrap(),
        "--truth-out",
        truth.to_str().unwrap(),
    ]));
    assert!(data.exists() && truth.exists());

    let out = run(fast_flags(bin().arg("discover").arg(&data))
        .args(["--output", pred.to_str().unwrap()]));
    // CI test accounting goes to stderr, the graph to the output file.
    assert!(String::from_utf8_lossy(&out.stderr).contains("CI tests"));
    let graph: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&pred).unwrap()).unwrap();
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 3);

    let out = run(bin().arg("evaluate").arg(&pred).arg(&truth).args(["--ci-tests", "4"]));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["f1_adjacency"], 1.0);
    assert_eq!(report["f1_oriented"], 1.0);
    assert_eq!(report["ci_tests"], 4);
}

#[test]
fn discover_emits_dot_when_asked() {
    let dir = tempdir("dot");
    let data = dir.join("data.csv");
    run(bin().args(["generate", "--structure", "mediator", "--t-len", "400", "--seed", "1"])
        .args(["--data-out", data.to_str().unwrap()])
        .args(["--truth-out", dir.join("t.json").to_str().unwrap()]));
    let out = run(fast_flags(bin().arg("discover").arg(&data)).args(["--format", "dot"]));
    let dot = String::from_utf8_lossy(&out.stdout);
    assert!(dot.starts_with("digraph"), "dot output: {dot}");
    assert!(dot.contains("X1"));
}

#[test]
fn bench_report_aggregates_seeds() {
    let out = run(fast_flags(bin().args([
        "bench",
        "--structure",
        "v_structure",
        "--n-seeds",
        "2",
        "--t-len",
        "300",
    ])));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["structure"], "v_structure");
    assert_eq!(report["n_seeds"], 2);
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 2);
    let f1 = report["f1_mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    // The human-readable table lands on stderr.
    assert!(String::from_utf8_lossy(&out.stderr).contains("oriented F1"));
}

#[test]
fn project_collapses_lagged_edges() {
    let dir = tempdir("project");
    let edges = dir.join("edges.json");
    std::fs::write(
        &edges,
        r#"[
            {"src": "a", "src_offset": -1, "dst": "b", "dst_offset": 0},
            {"src": "b", "src_offset": -2, "dst": "b", "dst_offset": 0}
        ]"#,
    )
    .unwrap();
    let out = run(bin().arg("project").arg(&edges));
    let graph: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(graph["nodes"], serde_json::json!(["a", "b"]));
    assert_eq!(graph["edges"][0]["src"], "a");
    assert_eq!(graph["edges"][0]["mark"], "directed");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempdir("config");
    let data = dir.join("data.csv");
    run(bin().args(["generate", "--structure", "fork", "--t-len", "300", "--seed", "7"])
        .args(["--data-out", data.to_str().unwrap()])
        .args(["--truth-out", dir.join("t.json").to_str().unwrap()]));

    // The file alone is rejected (zero window), so success proves the flag won.
    let cfg = dir.join("pctmi.conf");
    std::fs::write(&cfg, "max-window=0\nmax-lag=2\npermutations=20\nmin-samples=30\n").unwrap();
    let with_file_only = bin()
        .arg("discover")
        .arg(&data)
        .args(["--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!with_file_only.status.success());
    run(bin()
        .arg("discover")
        .arg(&data)
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--max-window", "2"]));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let missing = bin().arg("discover").arg("definitely-not-here.csv").output().unwrap();
    assert!(!missing.status.success());

    let dir = tempdir("badcfg");
    let cfg = dir.join("bad.conf");
    std::fs::write(&cfg, "window-size=3\n").unwrap();
    let data = dir.join("data.csv");
    std::fs::write(&data, "time,a,b\n0,1.0,2.0\n1,2.0,3.0\n").unwrap();
    let unknown_key = bin()
        .arg("discover")
        .arg(&data)
        .args(["--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!unknown_key.status.success());
    assert!(String::from_utf8_lossy(&unknown_key.stderr).contains("unknown config key"));

    let unknown_structure =
        bin().args(["generate", "--structure", "ring"]).output().unwrap();
    assert!(!unknown_structure.status.success());
}

#[test]
fn generate_with_rates_writes_long_csv() {
    let dir = tempdir("rates");
    let data = dir.join("mixed.csv");
    run(bin()
        .args(["generate", "--structure", "fork", "--t-len", "300", "--seed", "2"])
        .args(["--rates", "1,2,1"])
        .args(["--data-out", data.to_str().unwrap()])
        .args(["--truth-out", dir.join("t.json").to_str().unwrap()]));
    let text = std::fs::read_to_string(&data).unwrap();
    // Mixed rates cannot share a wide grid, so the writer falls back to the
    // long layout.
    assert!(text.starts_with("series,time,value"), "got header {:?}", text.lines().next());
}
