use std::path::Path;
use std::process::{Command, Output};

fn matchlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchlab"))
        .args(args)
        .env_remove("MATCHLAB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.mlm"), dir.path().join("b.mlm"));
    for p in [&a, &b] {
        ok(&matchlab(&["generate", "--n", "30", "--seed", "9", "--out", p.to_str().unwrap()]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn run_on_a_dump_reports_a_clean_audit() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("m.mlm");
    ok(&matchlab(&["generate", "--n", "40", "--seed", "3", "--out", dump.to_str().unwrap()]));
    let out_dir = dir.path().join("run");
    let stdout = ok(&matchlab(&[
        "run",
        "--market",
        dump.to_str().unwrap(),
        "--edges",
        "acceptable",
        "--L",
        "0.2",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(stdout.contains("audit: 0 blocking pairs"), "{stdout}");
    for f in ["matching.csv", "losses.csv", "summary.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let losses = std::fs::read_to_string(out_dir.join("losses.csv")).unwrap();
    assert_eq!(losses.lines().count(), 1 + 80);
}

#[test]
fn many_to_one_generation_checks_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.mlm");
    ok(&matchlab(&["generate", "--nw", "40", "--d", "4", "--seed", "1", "--out", p.to_str().unwrap()]));
    let bad = matchlab(&["generate", "--nw", "40", "--nc", "7", "--d", "4", "--seed", "1", "--out", p.to_str().unwrap()]);
    assert!(!bad.status.success());
}

#[test]
fn unknown_experiment_is_an_error() {
    let out = matchlab(&["experiment", "no-such-thing", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown id"));
}

#[test]
fn flags_override_config_file_and_config_seed_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "runs = 2\nn = 60\nseed = 77\nl = 0.3\n").unwrap();
    let out_dir = dir.path().join("out");
    let run = |extra: &[&str]| {
        let mut args = vec!["experiment", "edge-counts", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        ok(&matchlab(&args));
        json(&out_dir.join("edge-counts.json"))
    };
    let from_file = run(&[]);
    assert_eq!(from_file["config"]["seed"], 77);
    assert_eq!(from_file["config"]["runs"], 2);
    let overridden = run(&["--seed", "5", "--n", "50"]);
    assert_eq!(overridden["config"]["seed"], 5);
    assert_eq!(overridden["config"]["n"], 50);
    assert_eq!(overridden["config"]["l"], 0.3);
    assert!(out_dir.join("edge-counts.runs.csv").exists());
}

#[test]
fn experiment_reports_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for jobs in ["1", "2"] {
        let out_dir = dir.path().join(jobs);
        ok(&matchlab(&[
            "--jobs", jobs, "experiment", "unique-partners", "--runs", "3", "--n", "80", "--seed", "4", "--format", "json",
            "--out", out_dir.to_str().unwrap(),
        ]));
        reports.push(json(&out_dir.join("unique-partners.json")));
    }
    assert_eq!(reports[0], reports[1]);
}
