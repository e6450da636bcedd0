//! Black-box tests of the `ghpo` binary: every subcommand end to end
//! in temporary directories, plus exit codes and error lines.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ghpo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghpo"))
        .args(args)
        .current_dir(dir)
        .env_remove("GHPO_OUT_DIR")
        .output()
        .expect("spawn ghpo")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        stdout(out),
        stderr(out)
    );
}

fn write_tiny_config(dir: &Path, name: &str, ghpo: bool) -> String {
    let schedule = if ghpo { "0.25, 0.5, 0.75" } else { "" };
    let text = format!(
        "total_steps = 12\ncold_start_N = 3\nomega_schedule = {schedule}\n"
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_data_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,lr,format_reward,accuracy_reward,mean_resp_len,grad_norm,difficult_fraction,resample_count"
    );
    lines.count()
}

#[test]
fn train_writes_metrics_checkpoints_and_dataset() {
    let tmp = TempDir::new().unwrap();
    let out = ghpo(
        tmp.path(),
        &[
            "train",
            "--synthetic",
            "16",
            "--stop-after",
            "4",
            "--checkpoint-every",
            "2",
            "--out",
            "run",
        ],
    );
    assert_ok(&out);
    assert!(stdout(&out).contains("trained 4 steps"));

    let run = tmp.path().join("run");
    assert_eq!(csv_data_rows(&run.join("metrics.csv")), 4);
    assert!(run.join("metrics.jsonl").exists());
    assert!(run.join("dataset.jsonl").exists());
    assert!(run.join("checkpoint-000002.json").exists());
    assert!(run.join("checkpoint-000004.json").exists());
    assert!(run.join("checkpoint-latest.json").exists());
}

#[test]
fn resume_extends_the_same_run() {
    let tmp = TempDir::new().unwrap();
    let first = ghpo(
        tmp.path(),
        &["train", "--synthetic", "16", "--stop-after", "3", "--out", "run"],
    );
    assert_ok(&first);
    let second = ghpo(
        tmp.path(),
        &[
            "train",
            "--synthetic",
            "16",
            "--resume",
            "run/checkpoint-latest.json",
            "--stop-after",
            "6",
            "--out",
            "run",
        ],
    );
    assert_ok(&second);
    assert!(stdout(&second).contains("trained 3 steps"));
    assert_eq!(csv_data_rows(&tmp.path().join("run/metrics.csv")), 6);
}

#[test]
fn out_dir_env_var_is_honored() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ghpo"))
        .args(["train", "--synthetic", "16", "--stop-after", "2"])
        .current_dir(tmp.path())
        .env("GHPO_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(tmp.path().join("from-env/metrics.csv").exists());
}

#[test]
fn eval_reports_mean_and_per_problem_lines() {
    let tmp = TempDir::new().unwrap();
    assert_ok(&ghpo(
        tmp.path(),
        &["train", "--synthetic", "16", "--stop-after", "1", "--out", "run"],
    ));
    let out = ghpo(
        tmp.path(),
        &[
            "eval",
            "--data",
            "run/dataset.jsonl",
            "--checkpoint",
            "run/checkpoint-latest.json",
            "--mode",
            "avg-at-k",
            "--k",
            "4",
            "--per-problem",
        ],
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("mode=avg_at_k k=4 problems=16 samples=64"));
    assert!(text.contains("mean "));
    assert!(text.lines().count() >= 10, "expected per-problem lines:\n{text}");
}

#[test]
fn verify_scores_predictions_with_aggregate() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("gold.jsonl"),
        concat!(
            "{\"id\": \"p1\", \"statement\": \"1+1=?\", \"solution\": \"...\", \"answer\": \"2\"}\n",
            "{\"id\": \"p2\", \"statement\": \"capital?\", \"solution\": \"...\", \"answer\": \"3/7\"}\n",
        ),
    )
    .unwrap();
    fs::write(
        tmp.path().join("pred.jsonl"),
        concat!(
            "{\"id\": \"p1\", \"response\": \"<think>sum</think><answer>\\\\boxed{2}</answer>\"}\n",
            "{\"id\": \"p2\", \"response\": \"<think>frac</think><answer>\\\\boxed{6/15}</answer>\"}\n",
        ),
    )
    .unwrap();
    let out = ghpo(tmp.path(), &["verify", "pred.jsonl", "gold.jsonl"]);
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("p1 acc=1 fmt=1"));
    assert!(text.contains("p2 acc=0 fmt=1"));
    assert!(text.contains("accuracy 1/2 = 0.500000"));

    let missing = ghpo(tmp.path(), &["verify", "pred.jsonl", "pred.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error:"));
}

#[test]
fn simulate_writes_table_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let a = write_tiny_config(tmp.path(), "a.cfg", false);
    let b = write_tiny_config(tmp.path(), "b.cfg", true);
    let out = ghpo(
        tmp.path(),
        &[
            "simulate",
            "--config-a",
            &a,
            "--config-b",
            &b,
            "--seeds",
            "1,2",
            "--out",
            "cmp",
        ],
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("GRPO"));
    assert!(text.contains("GHPO"));
    assert!(text.contains("stderr"));
    let cmp = tmp.path().join("cmp");
    assert!(cmp.join("compare.txt").exists());
    assert_eq!(csv_data_rows(&cmp.join("run-a.metrics.csv")), 12);
    assert_eq!(csv_data_rows(&cmp.join("run-b.metrics.csv")), 12);
}

#[test]
fn simulate_rejects_a_single_seed() {
    let tmp = TempDir::new().unwrap();
    let a = write_tiny_config(tmp.path(), "a.cfg", false);
    let b = write_tiny_config(tmp.path(), "b.cfg", true);
    let out = ghpo(
        tmp.path(),
        &["simulate", "--config-a", &a, "--config-b", &b, "--seeds", "1", "--out", "cmp"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("need \u{2265} 2 seeds"));
}

#[test]
fn plot_renders_five_svgs_and_overlays_two_runs() {
    let tmp = TempDir::new().unwrap();
    assert_ok(&ghpo(
        tmp.path(),
        &["train", "--synthetic", "16", "--stop-after", "3", "--out", "run"],
    ));
    let single = ghpo(
        tmp.path(),
        &["plot", "--metrics", "run/metrics.csv", "--out", "figs"],
    );
    assert_ok(&single);
    for stem in [
        "format_reward",
        "accuracy_reward",
        "mean_resp_len",
        "grad_norm",
        "difficult_fraction",
    ] {
        assert!(tmp.path().join(format!("figs/{stem}.svg")).exists(), "{stem}");
    }

    let overlay = ghpo(
        tmp.path(),
        &[
            "plot",
            "--metrics",
            "run/metrics.csv",
            "--metrics-b",
            "run/metrics.csv",
            "--out",
            "figs2",
        ],
    );
    assert_ok(&overlay);
    let svg = fs::read_to_string(tmp.path().join("figs2/grad_norm.svg")).unwrap();
    assert!(svg.contains("GRPO"));
    assert!(svg.contains("GHPO"));
}

#[test]
fn train_requires_a_data_source() {
    let tmp = TempDir::new().unwrap();
    let out = ghpo(tmp.path(), &["train", "--stop-after", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--data"));
}

#[test]
fn unknown_flags_exit_with_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = ghpo(tmp.path(), &["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let bad_cmd = ghpo(tmp.path(), &["frobnicate"]);
    assert_eq!(bad_cmd.status.code(), Some(2));
}
