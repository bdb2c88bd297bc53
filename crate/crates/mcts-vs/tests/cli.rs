//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcts-vs"))
}

#[test]
fn run_subcommand_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"
problem = "hartmann6_300"
method = "mcts_vs"
optimizer = "random_search"
budget = 48
seeds = [7, 8]
out_dir = "{}"
"#,
            out_dir.display()
        ),
    )
    .unwrap();

    let output = bin().arg("run").arg(&config).output().unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("mean_final_best"), "{stdout}");
    assert!(out_dir.join("seed_7.csv").exists());
    assert!(out_dir.join("seed_8.csv").exists());
    assert!(out_dir.join("summary.json").exists());

    // The recall subcommand digests the trace directory.
    let output = bin().arg("recall").arg(&out_dir).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("mean_recall"), "{stdout}");
}

#[test]
fn run_subcommand_rejects_bad_config_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        r#"
problem = "does_not_exist"
method = "mcts_vs"
budget = 48
seeds = [7]
"#,
    )
    .unwrap();
    let output = bin().arg("run").arg(&config).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("does_not_exist"), "{stderr}");
}

#[test]
fn regretlab_subcommand_emits_report() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("lab.json");
    let config = dir.path().join("lab.toml");
    std::fs::write(
        &config,
        format!(
            r#"
dims = 2
resolution = 5
upper = 1.0
signal_variance = 1.0
length_scale = 0.3
noise_variance = 0.01
delta = 0.1
a = 1.0
b = 1.0
horizon = 8
runs = 4
seed = 11
policy = "full"
out = "{}"
"#,
            report_path.display()
        ),
    )
    .unwrap();
    let output = bin().arg("regretlab").arg(&config).output().unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report = std::fs::read_to_string(&report_path).unwrap();
    assert!(report.contains("summed_check_fraction"));
}

#[test]
fn bench_smoke_suite_runs() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("bench")
        .arg("smoke")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(dir.path().join("hartmann6_300-mcts_vs").join("summary.json").exists());
    assert!(dir.path().join("hartmann6_300-random_search").join("summary.json").exists());
}

#[test]
fn timing_subcommand_reports_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let write_cfg = |name: &str, method: &str| {
        let path = dir.path().join(name);
        std::fs::write(
            &path,
            format!(
                r#"
problem = "hartmann6_300"
method = "{method}"
optimizer = "random_search"
budget = 40
seeds = [3]
"#
            ),
        )
        .unwrap();
        path
    };
    let a = write_cfg("a.toml", "mcts_vs");
    let b = write_cfg("b.toml", "random_search");
    let output = bin()
        .arg("timing")
        .arg(&a)
        .arg(&b)
        .arg("--at")
        .arg("30")
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("faster"), "{stdout}");
}
