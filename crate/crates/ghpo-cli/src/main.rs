//! `ghpo`: command-line laboratory for GHPO and GRPO training runs.
//!
//! Subcommands:
//!
//! - `train`: optimize a toy policy on a JSONL or synthetic dataset,
//!   writing metrics (CSV + JSONL) and versioned checkpoints;
//! - `eval`: pass@1 / avg@k accuracy of a policy, hints never used;
//! - `verify`: score a predictions file against gold answers, one
//!   verdict line per record plus an aggregate accuracy;
//! - `simulate`: multi-seed GRPO-vs-GHPO comparison on a shared
//!   synthetic dataset, emitting a summary table and per-run metrics;
//! - `plot`: standalone SVG curves from metrics files, two-run overlay.
//!
//! Every subcommand exits 0 on success and nonzero with a one-line
//! `error: ...` message otherwise. `GHPO_OUT_DIR` overrides the default
//! output directory.

mod plot;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ghpo_core::compare::{simulate_compare, render_table, CompareSpec};
use ghpo_core::config::TrainConfig;
use ghpo_core::dataset::{load_dataset, save_dataset};
use ghpo_core::metrics::{read_metrics, write_metrics_csv};
use ghpo_core::policy::sim::{SimPolicy, SimScenario};
use ghpo_core::policy::softmax::SoftmaxPolicy;
use ghpo_core::policy::synth::synth_dataset;
use ghpo_core::policy::vocab::Vocab;
use ghpo_core::policy::Policy;
use ghpo_core::trainer::{
    evaluate, load_checkpoint, run_training, EvalMode, RunOptions, StepPath,
};
use ghpo_core::types::Problem;
use ghpo_core::verifier;

#[derive(Parser)]
#[command(
    name = "ghpo",
    version,
    about = "Desk-scale GHPO/GRPO training laboratory"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy; writes metrics.csv, metrics.jsonl, checkpoints.
    Train(TrainArgs),
    /// Evaluate a policy without hints (pass@1 or avg@k).
    Eval(EvalArgs),
    /// Score a predictions JSONL against gold problems.
    Verify(VerifyArgs),
    /// Multi-seed GRPO-vs-GHPO comparison on one synthetic dataset.
    Simulate(SimulateArgs),
    /// Render metric curves as standalone SVG files.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    /// GHPO when the omega schedule is non-empty, GRPO otherwise.
    Auto,
    Ghpo,
    Grpo,
}

impl From<RouteArg> for StepPath {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Auto => StepPath::Auto,
            RouteArg::Ghpo => StepPath::ForceGhpo,
            RouteArg::Grpo => StepPath::ForceGrpo,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Analytic simulation policy (difficulty-aware, fast).
    Sim,
    /// Tabular softmax token policy (exact gradients, slow).
    Softmax,
}

#[derive(Args)]
struct TrainArgs {
    /// Config file of `key = value` lines; desk defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL dataset of problems.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate a synthetic dataset with this many problems instead.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Fraction of synthetic problems drawn from the hard band.
    #[arg(long, default_value_t = 0.7)]
    hard_frac: f64,
    /// Output directory for metrics and checkpoints.
    #[arg(long, env = "GHPO_OUT_DIR", default_value = "runs/latest")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
    route: RouteArg,
    /// Checkpoint cadence in steps (0 = final checkpoint only).
    #[arg(long, default_value_t = 50)]
    checkpoint_every: usize,
    /// Resume from this checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop gracefully after this many completed steps.
    #[arg(long)]
    stop_after: Option<usize>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Sim)]
    policy: PolicyArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Config file; sampling settings and seed come from here.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL dataset of problems.
    #[arg(long)]
    data: PathBuf,
    /// Restore policy parameters from this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// pass-at-1 (strict, k forced to 1) or avg-at-k.
    #[arg(long, value_enum, default_value_t = ModeArg::PassAt1)]
    mode: ModeArg,
    /// Samples per problem for avg-at-k.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Sim)]
    policy: PolicyArg,
    /// Print one `id value` line per problem before the summary.
    #[arg(long)]
    per_problem: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    PassAt1,
    AvgAtK,
}

#[derive(Args)]
struct VerifyArgs {
    /// Predictions: one {"id", "response"} JSON object per line.
    pred: PathBuf,
    /// Gold problems in the dataset JSONL format.
    gold: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config for the first run (conventionally the GRPO baseline).
    #[arg(long)]
    config_a: PathBuf,
    /// Config for the second run (conventionally GHPO).
    #[arg(long)]
    config_b: PathBuf,
    /// Comma-separated seed list; at least two.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long, env = "GHPO_OUT_DIR", default_value = "runs/compare")]
    out: PathBuf,
    #[arg(long, default_value = "GRPO")]
    label_a: String,
    #[arg(long, default_value = "GHPO")]
    label_b: String,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSV of the (first) run.
    #[arg(long)]
    metrics: PathBuf,
    /// Metrics CSV of a second run to overlay.
    #[arg(long)]
    metrics_b: Option<PathBuf>,
    #[arg(long, default_value = "GRPO")]
    label_a: String,
    #[arg(long, default_value = "GHPO")]
    label_b: String,
    #[arg(long, env = "GHPO_OUT_DIR", default_value = "figs")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Plot(args) => cmd_plot(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_file(p)
            .with_context(|| format!("loading config {}", p.display())),
        None => Ok(TrainConfig::default()),
    }
}

/// Difficulty table for the sim policy: the `difficulty_level` tag when
/// present, 0 (trivially easy) otherwise.
fn difficulty_table(problems: &[Problem]) -> HashMap<String, f64> {
    problems
        .iter()
        .map(|p| (p.id.clone(), p.difficulty_level.unwrap_or(0) as f64))
        .collect()
}

fn load_problems(args: &TrainArgs, cfg: &TrainConfig, out: &Path) -> Result<(Vec<Problem>, HashMap<String, f64>)> {
    if let Some(n) = args.synthetic {
        let spec = CompareSpec::default();
        let (problems, table) = synth_dataset(n, args.hard_frac, spec.easy, spec.hard, cfg.seed);
        std::fs::create_dir_all(out)?;
        save_dataset(out.join("dataset.jsonl"), &problems)?;
        return Ok((problems, table));
    }
    if let Some(path) = &args.data {
        let problems = load_dataset(path)
            .with_context(|| format!("loading dataset {}", path.display()))?;
        let table = difficulty_table(&problems);
        return Ok((problems, table));
    }
    bail!("provide --data <file.jsonl> or --synthetic <n>");
}

fn restore_params<P: Policy>(policy: &mut P, path: &Path) -> Result<()> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.params.len() != policy.num_params() {
        bail!(
            "checkpoint has {} parameters, policy has {}",
            ckpt.params.len(),
            policy.num_params()
        );
    }
    policy.set_params(&ckpt.params);
    Ok(())
}

fn train_with<P: Policy>(
    policy: &mut P,
    problems: &[Problem],
    cfg: &TrainConfig,
    args: &TrainArgs,
) -> Result<()> {
    let opts = RunOptions {
        out_dir: args.out.clone(),
        checkpoint_every: args.checkpoint_every,
        resume_from: args.resume.clone(),
        route: args.route.into(),
        stop_after: args.stop_after,
    };
    let rows = run_training(policy, problems, cfg, &opts)?;
    match rows.last() {
        Some(last) => println!(
            "trained {} steps -> {} (accuracy_reward {:.4}, format_reward {:.4}, difficult_fraction {:.4})",
            rows.len(),
            args.out.display(),
            last.mean_accuracy_reward,
            last.mean_format_reward,
            last.difficult_fraction,
        ),
        None => println!("nothing to train: 0 steps requested"),
    }
    println!("metrics: {}", args.out.join("metrics.csv").display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (problems, table) = load_problems(&args, &cfg, &args.out)?;
    match args.policy {
        PolicyArg::Sim => {
            let mut policy = SimPolicy::new(SimScenario::default(), table);
            train_with(&mut policy, &problems, &cfg, &args)
        }
        PolicyArg::Softmax => {
            let mut policy = SoftmaxPolicy::new(Vocab::standard());
            train_with(&mut policy, &problems, &cfg, &args)
        }
    }
}

fn eval_with<P: Policy>(policy: &P, problems: &[Problem], cfg: &TrainConfig, args: &EvalArgs) -> Result<()> {
    let mode = match args.mode {
        ModeArg::PassAt1 => EvalMode::PassAt1,
        ModeArg::AvgAtK => EvalMode::AvgAtK,
    };
    let report = evaluate(policy, problems, args.k, mode, cfg)?;
    if args.per_problem {
        for (p, v) in problems.iter().zip(&report.per_problem) {
            println!("{} {v}", p.id);
        }
    }
    let mode_name = match report.mode {
        EvalMode::PassAt1 => "pass_at_1",
        EvalMode::AvgAtK => "avg_at_k",
    };
    println!(
        "mode={mode_name} k={} problems={} samples={}",
        report.k,
        report.per_problem.len(),
        report.total_samples
    );
    println!("mean {:.6}", report.mean);
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let problems = load_dataset(&args.data)
        .with_context(|| format!("loading dataset {}", args.data.display()))?;
    match args.policy {
        PolicyArg::Sim => {
            let mut policy = SimPolicy::new(SimScenario::default(), difficulty_table(&problems));
            if let Some(ck) = &args.checkpoint {
                restore_params(&mut policy, ck)?;
            }
            eval_with(&policy, &problems, &cfg, &args)
        }
        PolicyArg::Softmax => {
            let mut policy = SoftmaxPolicy::new(Vocab::standard());
            if let Some(ck) = &args.checkpoint {
                restore_params(&mut policy, ck)?;
            }
            eval_with(&policy, &problems, &cfg, &args)
        }
    }
}

#[derive(Deserialize)]
struct PredRecord {
    id: String,
    response: String,
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let gold = load_dataset(&args.gold)
        .with_context(|| format!("loading gold {}", args.gold.display()))?;
    let by_id: HashMap<&str, &Problem> = gold.iter().map(|p| (p.id.as_str(), p)).collect();
    let text = std::fs::read_to_string(&args.pred)
        .with_context(|| format!("reading predictions {}", args.pred.display()))?;
    let cfg = TrainConfig::default();
    let mut total = 0usize;
    let mut correct = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredRecord = serde_json::from_str(line)
            .with_context(|| format!("predictions line {}", idx + 1))?;
        let problem = by_id
            .get(rec.id.as_str())
            .ok_or_else(|| anyhow!("no gold problem with id {:?}", rec.id))?;
        let score = verifier::score(&rec.response, problem, &cfg);
        total += 1;
        correct += score.accuracy as usize;
        println!("{} acc={} fmt={}", rec.id, score.accuracy, score.format);
    }
    if total == 0 {
        bail!("no prediction records in {}", args.pred.display());
    }
    println!(
        "accuracy {correct}/{total} = {:.6}",
        correct as f64 / total as f64
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg_a = TrainConfig::from_file(&args.config_a)
        .with_context(|| format!("loading config {}", args.config_a.display()))?;
    let cfg_b = TrainConfig::from_file(&args.config_b)
        .with_context(|| format!("loading config {}", args.config_b.display()))?;
    let report = simulate_compare(
        &cfg_a,
        &cfg_b,
        &args.seeds,
        &CompareSpec::default(),
        &SimScenario::default(),
    )?;
    let table = render_table(&report, &args.label_a, &args.label_b);
    std::fs::create_dir_all(&args.out)?;
    let table_path = args.out.join("compare.txt");
    std::fs::write(&table_path, &table)?;
    // First-seed metrics in the standard CSV format, ready for `plot`.
    write_metrics_csv(&args.out.join("run-a.metrics.csv"), &report.a.per_seed_metrics[0])?;
    write_metrics_csv(&args.out.join("run-b.metrics.csv"), &report.b.per_seed_metrics[0])?;
    print!("{table}");
    println!("table: {}", table_path.display());
    println!(
        "metrics: {} and {}",
        args.out.join("run-a.metrics.csv").display(),
        args.out.join("run-b.metrics.csv").display()
    );
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let rows_a = read_metrics(&args.metrics)
        .with_context(|| format!("reading {}", args.metrics.display()))?;
    let rows_b = match &args.metrics_b {
        Some(p) => Some(read_metrics(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut series = vec![plot::Series {
        label: args.label_a.clone(),
        rows: &rows_a,
    }];
    if let Some(rows) = &rows_b {
        series.push(plot::Series {
            label: args.label_b.clone(),
            rows,
        });
    }
    let paths = plot::emit_plots(&series, &args.out)?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}
