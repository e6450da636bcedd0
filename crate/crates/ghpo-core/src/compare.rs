//! Head-to-head simulated training runs: two configurations, shared
//! datasets and rng bases, multiple seeds.
//!
//! For each seed both configurations train on the SAME synthetic
//! dataset with the SAME base seed, so every difference in the metric
//! streams is attributable to the configurations themselves. The report
//! carries per-seed final accuracies (mean accuracy reward over the
//! last [`FINAL_WINDOW`] steps), per-seed mean gradient norms, their
//! across-seed mean and standard error, and per-step trajectories
//! averaged over seeds. Everything is deterministic given the seed
//! list.

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::policy::sim::{SimPolicy, SimScenario};
use crate::policy::synth::{synth_dataset, Band};
use crate::trainer::{run_training_inmem, StepPath};
use crate::types::RunMetrics;

/// Final accuracy = mean accuracy reward over this many trailing steps.
pub const FINAL_WINDOW: usize = 30;

/// Shape of the synthetic dataset both configurations train on.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub n_problems: usize,
    pub hard_frac: f64,
    pub easy: Band,
    pub hard: Band,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            n_problems: 64,
            hard_frac: 0.7,
            easy: Band::new(0.6, 1.4),
            hard: Band::new(3.4, 4.4),
        }
    }
}

/// One configuration's results across all seeds.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub per_seed_final_accuracy: Vec<f64>,
    pub per_seed_mean_grad_norm: Vec<f64>,
    pub mean_final_accuracy: f64,
    /// Standard error of the per-seed final accuracies.
    pub stderr_final_accuracy: f64,
    pub mean_grad_norm: f64,
    /// Seed-averaged per-step trajectories.
    pub accuracy_trajectory: Vec<f64>,
    pub grad_norm_trajectory: Vec<f64>,
    pub difficult_trajectory: Vec<f64>,
    /// Full rows, indexed [seed][step].
    pub per_seed_metrics: Vec<Vec<RunMetrics>>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub a: RunSummary,
    pub b: RunSummary,
}

/// Trailing-window mean of the accuracy reward.
pub fn final_accuracy(rows: &[RunMetrics]) -> f64 {
    let window = rows.len().min(FINAL_WINDOW).max(1);
    let tail = &rows[rows.len() - window.min(rows.len())..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|r| r.mean_accuracy_reward).sum::<f64>() / tail.len() as f64
}

fn run_one(
    cfg: &TrainConfig,
    seed: u64,
    spec: &CompareSpec,
    scenario: &SimScenario,
) -> Result<Vec<RunMetrics>> {
    let (problems, table) = synth_dataset(spec.n_problems, spec.hard_frac, spec.easy, spec.hard, seed);
    let mut policy = SimPolicy::new(scenario.clone(), table);
    let run_cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    run_training_inmem(&mut policy, &problems, &run_cfg, StepPath::Auto, |_| Ok(()))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(runs: Vec<Vec<RunMetrics>>) -> RunSummary {
    let per_seed_final_accuracy: Vec<f64> = runs.iter().map(|r| final_accuracy(r)).collect();
    let per_seed_mean_grad_norm: Vec<f64> = runs
        .iter()
        .map(|r| {
            if r.is_empty() {
                0.0
            } else {
                r.iter().map(|m| m.grad_norm).sum::<f64>() / r.len() as f64
            }
        })
        .collect();
    let steps = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    let traj = |f: &dyn Fn(&RunMetrics) -> f64| -> Vec<f64> {
        (0..steps)
            .map(|t| runs.iter().map(|r| f(&r[t])).sum::<f64>() / runs.len() as f64)
            .collect()
    };
    let (mean_final_accuracy, stderr_final_accuracy) = mean_and_stderr(&per_seed_final_accuracy);
    let (mean_grad_norm, _) = mean_and_stderr(&per_seed_mean_grad_norm);
    RunSummary {
        accuracy_trajectory: traj(&|m| m.mean_accuracy_reward),
        grad_norm_trajectory: traj(&|m| m.grad_norm),
        difficult_trajectory: traj(&|m| m.difficult_fraction),
        per_seed_final_accuracy,
        per_seed_mean_grad_norm,
        mean_final_accuracy,
        stderr_final_accuracy,
        mean_grad_norm,
        per_seed_metrics: runs,
    }
}

/// Train both configurations once per seed on shared datasets and
/// summarize. Requires at least two seeds for the stderr columns.
pub fn simulate_compare(
    cfg_a: &TrainConfig,
    cfg_b: &TrainConfig,
    seeds: &[u64],
    spec: &CompareSpec,
    scenario: &SimScenario,
) -> Result<CompareReport> {
    if seeds.len() < 2 {
        return Err(Error::NeedMoreSeeds { got: seeds.len() });
    }
    cfg_a.validate()?;
    cfg_b.validate()?;
    let mut runs_a = Vec::with_capacity(seeds.len());
    let mut runs_b = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        runs_a.push(run_one(cfg_a, seed, spec, scenario)?);
        runs_b.push(run_one(cfg_b, seed, spec, scenario)?);
    }
    Ok(CompareReport {
        seeds: seeds.to_vec(),
        a: summarize(runs_a),
        b: summarize(runs_b),
    })
}

/// Deterministic plain-text table of a comparison report.
pub fn render_table(report: &CompareReport, label_a: &str, label_b: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "simulated comparison over {} seeds: {label_a} vs {label_b}\n\n",
        report.seeds.len()
    ));
    out.push_str(&format!(
        "{:<10} {:>16} {:>16} {:>20} {:>20}\n",
        "seed",
        format!("final_acc[{label_a}]"),
        format!("final_acc[{label_b}]"),
        format!("grad_norm[{label_a}]"),
        format!("grad_norm[{label_b}]")
    ));
    for (i, seed) in report.seeds.iter().enumerate() {
        out.push_str(&format!(
            "{:<10} {:>16.6} {:>16.6} {:>20.8} {:>20.8}\n",
            seed,
            report.a.per_seed_final_accuracy[i],
            report.b.per_seed_final_accuracy[i],
            report.a.per_seed_mean_grad_norm[i],
            report.b.per_seed_mean_grad_norm[i]
        ));
    }
    out.push_str(&format!(
        "{:<10} {:>16.6} {:>16.6} {:>20.8} {:>20.8}\n",
        "mean",
        report.a.mean_final_accuracy,
        report.b.mean_final_accuracy,
        report.a.mean_grad_norm,
        report.b.mean_grad_norm
    ));
    out.push_str(&format!(
        "{:<10} {:>16.6} {:>16.6}\n\n",
        "stderr", report.a.stderr_final_accuracy, report.b.stderr_final_accuracy
    ));
    let edge = |v: &[f64]| -> (f64, f64) {
        match (v.first(), v.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => (0.0, 0.0),
        }
    };
    let (a0, a1) = edge(&report.a.difficult_trajectory);
    let (b0, b1) = edge(&report.b.difficult_trajectory);
    out.push_str(&format!(
        "difficult_fraction[{label_a}]: start {a0:.4}, end {a1:.4}\n"
    ));
    out.push_str(&format!(
        "difficult_fraction[{label_b}]: start {b0:.4}, end {b1:.4}\n"
    ));
    out
}
