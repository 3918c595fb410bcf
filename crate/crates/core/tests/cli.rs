use std::path::Path;
use std::process::{Command, Output};

use safeq::config::parse_config_str;
use safeq::harness::{compare_baseline, run_episode, sweep_ksb, ExperimentConfig};
use safeq::report::{render_csv, render_summary};
use safeq::riccati::solve_care;

fn safeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safeq"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_matches_library_on_default_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "# defaults\n");
    let out_dir = dir.path().join("nested/run");
    let out = safeq(&["run", "-c", &cfg_path, "-o", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let cli_csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let lib_csv = render_csv(&run_episode(&ExperimentConfig::default()).unwrap().log).unwrap();
    assert_eq!(cli_csv, lib_csv);
    assert_eq!(cli_csv.lines().count(), 20_002);
    assert!(out_dir.join("metrics.csv").exists());
    assert!(out_dir.join("config.txt").exists());
}

#[test]
fn run_without_config_uses_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = safeq(&["run", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let written = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert_eq!(
        parse_config_str(&written).unwrap(),
        ExperimentConfig::default()
    );
}

#[test]
fn sweep_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let text = "t_end = 2\nseed = 3\n";
    let cfg_path = write_config(dir.path(), text);
    let out = safeq(&[
        "sweep",
        "-c",
        &cfg_path,
        "--ksb",
        "0.1,0.2,0.5",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let cfg = parse_config_str(text).unwrap();
    let expected = render_summary(&sweep_ksb(&cfg, &[0.1, 0.2, 0.5]).unwrap()).unwrap();
    let written = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(written, expected);
    assert_eq!(
        written.lines().filter(|l| l.starts_with("#ref,")).count(),
        5
    );
}

#[test]
fn compare_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let text = "t_end = 1\n";
    let cfg_path = write_config(dir.path(), text);
    let out = safeq(&[
        "compare",
        "-c",
        &cfg_path,
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (proposed, baseline) = compare_baseline(&parse_config_str(text).unwrap()).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    assert_eq!(read("proposed.csv"), render_csv(&proposed.log).unwrap());
    assert_eq!(read("baseline.csv"), render_csv(&baseline.log).unwrap());
    assert!(read("compare.csv").starts_with("run,"));
}

#[test]
fn oracle_prints_riccati_solution() {
    let out = safeq(&["oracle"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let sol = solve_care(&ExperimentConfig::default().sys).unwrap();
    assert!(
        text.contains("W_a = -5.14400902933, -8.10358539657"),
        "{text}"
    );
    assert!(text.contains("ARE residual"));
    assert!(text.contains(&format!("Kleinman iterations = {}", sol.iterations)));
}

#[test]
fn bad_configs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("seed = 1\nA = 2x2: 0, 1, 1.6\n", "line 2"),
        ("k_sb = -1\n", "k_sb"),
        ("bogus = 1\n", "bogus"),
    ];
    for (text, needle) in cases {
        let cfg_path = write_config(dir.path(), text);
        let out = safeq(&["oracle", "-c", &cfg_path]);
        assert!(!out.status.success(), "accepted {text:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
    let missing = safeq(&[
        "run",
        "-c",
        "/definitely/not/here.cfg",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
}

#[test]
fn verify_catches_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "t_end = 2\n");
    let out = safeq(&["verify", "-c", &cfg_path, "--inject-fault", "are"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("[FAIL] riccati/are_residual"), "{text}");
}

#[test]
fn verify_exit_status_follows_report() {
    let out = safeq(&["verify"]);
    let text = stdout(&out);
    let properties = text
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .count();
    assert_eq!(properties, 26, "{text}");
    assert!(text.contains("[PASS] riccati/are_residual"));
    let any_failed = text.lines().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(out.status.success(), !any_failed);
}
