//! Training loop: batching, refinement, gradient accumulation, AdamW
//! updates, metrics, checkpointing, and evaluation.
//!
//! One optimization step:
//!
//! 1. refine and sample every query of the batch in parallel (each query
//!    owns a counter-derived rng stream keyed by step and query index,
//!    so parallel and sequential builds draw identically);
//! 2. split the resulting groups into `grad_accum_steps` micro-batches,
//!    assemble the clipped surrogate loss per micro-batch, and average
//!    the gradients;
//! 3. log `grad_norm` of the accumulated gradient (pre-update), then
//!    apply ONE AdamW update at the cosine learning rate for this step.
//!
//! Routing: `StepPath::Auto` uses GHPO refinement when the omega
//! schedule is non-empty and the plain GRPO path otherwise;
//! `ForceGrpo` always bypasses escalation but still measures the
//! difficult fraction past the cold-start gate, which is what makes the
//! hints-disabled GHPO configuration bit-identical to it. Steps are
//! numbered from 1 in the metrics; the cold-start gate covers the first
//! `cold_start_N` steps.
//!
//! Checkpoints are versioned JSON holding params, optimizer moments,
//! reference params, persisted hint states, and the completed step;
//! together with the stateless rng streams this makes resumed runs
//! bit-identical to uninterrupted ones.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{EscalationMode, TrainConfig};
use crate::control::{self, RefinementOutcome};
use crate::error::{Error, Result};
use crate::exec;
use crate::grpo;
use crate::metrics::MetricsWriter;
use crate::optimizer::OptimizerState;
use crate::policy::Policy;
use crate::rng::{stream, Domain};
use crate::schedule;
use crate::types::{HintState, Problem, RunMetrics};

/// Which sampling/refinement path a step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPath {
    /// GHPO when the omega schedule is non-empty, GRPO otherwise.
    Auto,
    ForceGhpo,
    ForceGrpo,
}

/// Mutable training state carried between steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Completed optimization steps; the next step is `completed + 1`.
    pub completed: usize,
    pub opt: OptimizerState,
    /// Frozen snapshot of the initial parameters (KL reference).
    pub ref_params: Vec<f64>,
    /// Persisted per-problem hint stages (across_epochs mode only).
    pub hint_states: HashMap<String, HintState>,
}

impl TrainState {
    pub fn new<P: Policy>(policy: &P) -> Self {
        Self {
            completed: 0,
            opt: OptimizerState::new(policy.num_params()),
            ref_params: policy.params().to_vec(),
            hint_states: HashMap::new(),
        }
    }
}

/// Dedicated GRPO path: one group at omega = 0, difficulty measured but
/// never acted on.
fn grpo_outcome<P: Policy>(
    problem: &Problem,
    policy: &P,
    cfg: &TrainConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
    step_index: usize,
) -> Result<RefinementOutcome> {
    let state = HintState::default();
    let prompt = control::render_prompt(problem, None, 0.0)?;
    let group = control::sample_group(problem, &prompt, &state, policy, cfg, rng);
    let was_difficult = if control::cold_start_gate(step_index, cfg.cold_start_n) {
        false
    } else {
        control::detect_difficult(&group.accuracy_rewards())?
    };
    Ok(RefinementOutcome {
        final_group: group,
        hint_state: state,
        stages_used: 0,
        resample_count: 1,
        was_difficult,
    })
}

/// Run one optimization step over a batch and return its metrics row.
pub fn train_step<P: Policy>(
    policy: &mut P,
    batch: &[&Problem],
    cfg: &TrainConfig,
    state: &mut TrainState,
    route: StepPath,
) -> Result<RunMetrics> {
    if batch.is_empty() {
        return Err(Error::EmptyRewards);
    }
    let step = state.completed + 1;
    let step_index = state.completed;
    let use_ghpo = match route {
        StepPath::Auto => cfg.hints_enabled(),
        StepPath::ForceGhpo => true,
        StepPath::ForceGrpo => false,
    };

    let policy_ref: &P = policy;
    let hint_states = &state.hint_states;
    let query_ids: Vec<u64> = (0..batch.len() as u64).collect();
    let outcomes: Vec<Result<RefinementOutcome>> = exec::map_collect(&query_ids, |&qi| {
        let problem = batch[qi as usize];
        let mut rng = stream(cfg.seed, Domain::Rollout, step as u64, qi, 0);
        if use_ghpo {
            match cfg.escalation_mode {
                EscalationMode::WithinStep => {
                    control::refine_and_resample(problem, policy_ref, cfg, &mut rng, step_index)
                }
                EscalationMode::AcrossEpochs => {
                    let prior = hint_states.get(&problem.id).cloned().unwrap_or_default();
                    control::refine_and_resample_persistent(
                        problem, &prior, policy_ref, cfg, &mut rng, step_index,
                    )
                }
            }
        } else {
            grpo_outcome(problem, policy_ref, cfg, &mut rng, step_index)
        }
    });
    let outcomes: Vec<RefinementOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let groups: Vec<_> = outcomes.iter().map(|o| o.final_group.clone()).collect();
    let accum = cfg.grad_accum_steps.max(1);
    let chunk_size = groups.len().div_ceil(accum);
    let mut gradient = vec![0.0; policy.num_params()];
    let mut chunks = 0usize;
    for chunk in groups.chunks(chunk_size) {
        let report = grpo::assemble_loss(chunk, policy, &state.ref_params, cfg)?;
        exec::axpy(1.0, &report.gradient, &mut gradient);
        chunks += 1;
    }
    let scale = 1.0 / chunks as f64;
    for g in gradient.iter_mut() {
        *g *= scale;
    }
    let grad_norm = exec::l2_norm(&gradient);

    let lr = schedule::cosine_lr(step.min(cfg.total_steps), cfg)?;
    let mut params = policy.params().to_vec();
    state.opt.adamw_step(&mut params, &gradient, lr);
    policy.set_params(&params);

    if use_ghpo && cfg.escalation_mode == EscalationMode::AcrossEpochs {
        for o in &outcomes {
            state
                .hint_states
                .insert(o.final_group.problem_id.clone(), o.hint_state.clone());
        }
    }

    let total_rollouts: usize = groups.iter().map(|g| g.rollouts.len()).sum();
    let n = total_rollouts.max(1) as f64;
    let fmt_sum: f64 = groups
        .iter()
        .flat_map(|g| g.rewards.iter())
        .map(|r| r.format as f64)
        .sum();
    let acc_sum: f64 = groups
        .iter()
        .flat_map(|g| g.rewards.iter())
        .map(|r| r.accuracy as f64)
        .sum();
    let len_sum: f64 = groups
        .iter()
        .flat_map(|g| g.rollouts.iter())
        .map(|r| r.len() as f64)
        .sum();
    let difficult = outcomes.iter().filter(|o| o.was_difficult).count();
    let resample_count: usize = outcomes.iter().map(|o| o.resample_count).sum();

    state.completed = step;
    Ok(RunMetrics {
        step,
        lr,
        mean_format_reward: fmt_sum / n,
        mean_accuracy_reward: acc_sum / n,
        mean_response_length: len_sum / n,
        grad_norm,
        difficult_fraction: difficult as f64 / batch.len() as f64,
        resample_count,
    })
}

fn epoch_permutation(seed: u64, epoch: u64, len: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut stream(seed, Domain::Shuffle, epoch, 0, 0));
    perm
}

/// Full training loop without file I/O: shuffles per epoch, runs
/// `total_steps` steps, feeds each metrics row to `sink`, and returns
/// the collected rows.
pub fn run_training_inmem<P: Policy, S: FnMut(&RunMetrics) -> Result<()>>(
    policy: &mut P,
    problems: &[Problem],
    cfg: &TrainConfig,
    route: StepPath,
    mut sink: S,
) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let mut state = TrainState::new(policy);
    run_span(policy, problems, cfg, route, &mut state, cfg.total_steps, &mut sink)
}

/// Run steps `state.completed + 1 ..= stop` under the full-run config;
/// `stop` never leaks into the learning-rate schedule, which always
/// spans `cfg.total_steps`.
fn run_span<P: Policy, S: FnMut(&RunMetrics) -> Result<()>>(
    policy: &mut P,
    problems: &[Problem],
    cfg: &TrainConfig,
    route: StepPath,
    state: &mut TrainState,
    stop: usize,
    sink: &mut S,
) -> Result<Vec<RunMetrics>> {
    if problems.is_empty() {
        return Err(Error::Dataset {
            line: 0,
            reason: "dataset is empty".into(),
        });
    }
    let steps_per_epoch = problems.len() / cfg.batch_size;
    if steps_per_epoch == 0 {
        return Err(Error::InvalidConfig {
            field: "batch_size".into(),
            reason: format!(
                "dataset has {} problems, fewer than one batch of {}",
                problems.len(),
                cfg.batch_size
            ),
        });
    }
    let mut rows = Vec::new();
    let mut perm: Vec<usize> = Vec::new();
    let mut perm_epoch = u64::MAX;
    for step in state.completed + 1..=stop.min(cfg.total_steps) {
        let epoch = ((step - 1) / steps_per_epoch) as u64;
        let slot = (step - 1) % steps_per_epoch;
        if epoch != perm_epoch {
            perm = epoch_permutation(cfg.seed, epoch, problems.len());
            perm_epoch = epoch;
        }
        let batch: Vec<&Problem> = perm[slot * cfg.batch_size..(slot + 1) * cfg.batch_size]
            .iter()
            .map(|&i| &problems[i])
            .collect();
        let row = train_step(policy, &batch, cfg, state, route)?;
        sink(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Versioned on-disk training snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Completed optimization steps at save time.
    pub step: usize,
    /// Base seed; with counter-derived rng streams, (seed, step) fully
    /// determines every draw of the continuation.
    pub seed: u64,
    pub params: Vec<f64>,
    pub ref_params: Vec<f64>,
    pub opt: OptimizerState,
    /// Persisted hint stages, sorted by problem id for stable files.
    pub hint_states: Vec<(String, HintState)>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string_pretty(ckpt)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    if ckpt.params.len() != ckpt.ref_params.len()
        || ckpt.params.len() != ckpt.opt.m.len()
        || ckpt.params.len() != ckpt.opt.v.len()
    {
        return Err(Error::Checkpoint(
            "inconsistent parameter shapes in checkpoint".into(),
        ));
    }
    Ok(ckpt)
}

/// File-based run options for [`run_training`].
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Checkpoint cadence in steps (0 disables periodic checkpoints; a
    /// final checkpoint is always written when steps ran).
    pub checkpoint_every: usize,
    pub resume_from: Option<PathBuf>,
    pub route: StepPath,
    /// Graceful early stop after this many completed steps. The
    /// learning-rate schedule still spans `total_steps`, so a stopped
    /// run resumes bit-identically to an uninterrupted one.
    pub stop_after: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            checkpoint_every: 50,
            resume_from: None,
            route: StepPath::Auto,
            stop_after: None,
        }
    }
}

fn checkpoint_of<P: Policy>(policy: &P, cfg: &TrainConfig, state: &TrainState) -> Checkpoint {
    let mut hint_states: Vec<(String, HintState)> = state
        .hint_states
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    hint_states.sort_by(|a, b| a.0.cmp(&b.0));
    Checkpoint {
        version: CHECKPOINT_VERSION,
        step: state.completed,
        seed: cfg.seed,
        params: policy.params().to_vec(),
        ref_params: state.ref_params.clone(),
        opt: state.opt.clone(),
        hint_states,
    }
}

/// Train with metrics files and periodic checkpoints in `out_dir`.
/// Resuming from a checkpoint continues bit-identically to an
/// uninterrupted run with the same seed and config.
pub fn run_training<P: Policy>(
    policy: &mut P,
    problems: &[Problem],
    cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let mut state;
    let mut writer;
    if let Some(ck_path) = &opts.resume_from {
        let ckpt = load_checkpoint(ck_path)?;
        if ckpt.seed != cfg.seed {
            return Err(Error::Checkpoint(format!(
                "seed mismatch: checkpoint has {}, config has {}",
                ckpt.seed, cfg.seed
            )));
        }
        if ckpt.params.len() != policy.num_params() {
            return Err(Error::Checkpoint(format!(
                "parameter count mismatch: checkpoint has {}, policy has {}",
                ckpt.params.len(),
                policy.num_params()
            )));
        }
        policy.set_params(&ckpt.params);
        state = TrainState {
            completed: ckpt.step,
            opt: ckpt.opt,
            ref_params: ckpt.ref_params,
            hint_states: ckpt.hint_states.into_iter().collect(),
        };
        writer = MetricsWriter::resume(&opts.out_dir, ckpt.step)?;
    } else {
        fs::create_dir_all(&opts.out_dir)?;
        state = TrainState::new(policy);
        writer = MetricsWriter::create(&opts.out_dir)?;
    }

    let target = opts.stop_after.unwrap_or(cfg.total_steps).min(cfg.total_steps);
    let mut rows = Vec::new();
    while state.completed < target {
        let next = state.completed + 1;
        let stop = if opts.checkpoint_every > 0 {
            (next.div_ceil(opts.checkpoint_every) * opts.checkpoint_every).min(target)
        } else {
            target
        };
        let mut span = run_span(
            policy,
            problems,
            cfg,
            opts.route,
            &mut state,
            stop,
            &mut |m: &RunMetrics| writer.write(m),
        )?;
        rows.append(&mut span);
        let ckpt = checkpoint_of(policy, cfg, &state);
        save_checkpoint(
            &opts.out_dir.join(format!("checkpoint-{:06}.json", state.completed)),
            &ckpt,
        )?;
        save_checkpoint(&opts.out_dir.join("checkpoint-latest.json"), &ckpt)?;
    }
    Ok(rows)
}

/// Evaluation mode: strict single-sample pass rate or mean accuracy
/// over k samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    PassAt1,
    AvgAtK,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// Samples drawn per problem (always 1 for pass@1).
    pub k: usize,
    /// Per-problem score in [0, 1].
    pub per_problem: Vec<f64>,
    pub mean: f64,
    pub total_samples: usize,
}

/// Evaluate without hints: k rollouts per problem on dedicated
/// evaluation rng streams keyed by (problem index, sample index).
pub fn evaluate<P: Policy>(
    policy: &P,
    problems: &[Problem],
    k: usize,
    mode: EvalMode,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::InvalidConfig {
            field: "k".into(),
            reason: "must be >= 1".into(),
        });
    }
    if problems.is_empty() {
        return Err(Error::Dataset {
            line: 0,
            reason: "dataset is empty".into(),
        });
    }
    let k = match mode {
        EvalMode::PassAt1 => 1,
        EvalMode::AvgAtK => k,
    };
    let idxs: Vec<u64> = (0..problems.len() as u64).collect();
    let per_problem: Vec<Result<f64>> = exec::map_collect(&idxs, |&pi| {
        let problem = &problems[pi as usize];
        let prompt = control::render_prompt(problem, None, 0.0)?;
        let mut correct = 0usize;
        for sample in 0..k as u64 {
            let mut rng = stream(cfg.seed, Domain::Eval, pi, sample, 0);
            let rollout = policy.sample_rollout(problem, &prompt, cfg, &mut rng);
            let score = crate::verifier::score(&rollout.text, problem, cfg);
            correct += score.accuracy as usize;
        }
        Ok(correct as f64 / k as f64)
    });
    let per_problem: Vec<f64> = per_problem.into_iter().collect::<Result<_>>()?;
    let mean = exec::neumaier_sum(per_problem.iter().copied()) / per_problem.len() as f64;
    Ok(EvalReport {
        mode,
        k,
        total_samples: k * problems.len(),
        per_problem,
        mean,
    })
}
