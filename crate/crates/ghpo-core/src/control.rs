//! GHPO control loop: difficulty detection, hint extraction, prompt
//! refinement, staged omega scheduling, and the cold-start gate.
//!
//! Per query and step:
//!
//! 1. during the first `cold_start_N` steps the gate is active: sample
//!    one group at omega = 0 and skip detection entirely;
//! 2. otherwise sample at omega = 0 and detect difficulty: a query is
//!    difficult iff ALL G accuracy rewards are zero (format rewards are
//!    ignored by detection);
//! 3. difficult queries escalate through the omega schedule: advance a
//!    stage, splice `floor(omega * chars)` leading characters of the
//!    solution trace into the prompt behind the guiding sentence, and
//!    resample a full fresh group of G; stop at the first stage with a
//!    correct rollout or when the schedule is exhausted.
//!
//! The returned group is always the LAST one sampled; downstream
//! advantages use its rewards and its refined prompt. Escalation is
//! bounded: at most `1 + |omega_schedule|` group samplings per query
//! per step. With an empty schedule the controller degrades to plain
//! GRPO sampling plus difficulty measurement.
//!
//! In `across_epochs` mode the hint stage persists per problem id
//! between visits instead: each visit samples at the persisted omega,
//! advances at most one stage when still difficult, and resets to stage
//! zero once the problem is solved at its current hint level.

use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::types::{GroupSample, HintState, Problem, PromptSpec};
use crate::verifier;

/// Fixed guidance text that precedes an injected hint (byte-exact,
/// exported so tests can assert equality).
pub const GUIDING_SENTENCE: &str =
    "The following text is the beginning part of the answer, which you can refer to for solving the problem:";

/// System message of the chat template.
pub const SYSTEM_MESSAGE: &str = "You are a helpful AI Assistant that provides well-reasoned and detailed responses. You first think about the reasoning process as an internal monologue and then provide the user with the answer. Respond in the following format:";

/// Chat-template block shared by every prompt: system turn plus the
/// response-format scaffold.
const TEMPLATE_HEAD: &str = "<|im_start|>system\nYou are a helpful AI Assistant that provides well-reasoned and detailed responses. You first think about the reasoning process as an internal monologue and then provide the user with the answer. Respond in the following format:\n<think>\n...\n<think>\n<answer>\n...\n<answer><|im_end|>\n<|im_start|>user\n";

const TEMPLATE_TAIL: &str = "<|im_start|>assistant\n";

/// Result of one query's refinement pass.
#[derive(Debug, Clone)]
pub struct RefinementOutcome {
    /// Last group sampled; advantages downstream come from its rewards
    /// under its prompt.
    pub final_group: GroupSample,
    /// Hint state to persist for this problem (across_epochs mode) or
    /// the state the final group was sampled under (within_step mode).
    pub hint_state: HintState,
    /// Number of stage advances performed this visit.
    pub stages_used: usize,
    /// Total group samplings this visit (1 + stages_used).
    pub resample_count: usize,
    /// Whether detection fired on this visit's initial group.
    pub was_difficult: bool,
}

/// True iff every accuracy reward in the group is zero.
pub fn detect_difficult(accuracy_rewards: &[f64]) -> Result<bool> {
    if accuracy_rewards.is_empty() {
        return Err(Error::EmptyRewards);
    }
    Ok(accuracy_rewards.iter().all(|a| *a == 0.0))
}

/// Leading `floor(omega * char_count)` characters of the trace, counted
/// in unicode scalar values.
pub fn extract_hint(solution_trace: &str, omega: f64) -> String {
    debug_assert!((0.0..=1.0).contains(&omega));
    let chars = solution_trace.chars().count();
    let take = (omega * chars as f64).floor() as usize;
    solution_trace.chars().take(take).collect()
}

/// Like [`extract_hint`] but extends the cut to the next whitespace
/// boundary so the hint never ends mid-word. Opt-in; the controller
/// itself always uses the exact floor cut.
pub fn extract_hint_snapped(solution_trace: &str, omega: f64) -> String {
    let base = extract_hint(solution_trace, omega);
    if base.is_empty()
        || base.chars().count() == solution_trace.chars().count()
        || base.ends_with(char::is_whitespace)
    {
        return base;
    }
    let mut out: String = base;
    for c in solution_trace.chars().skip(out.chars().count()) {
        if c.is_whitespace() {
            break;
        }
        out.push(c);
    }
    out
}

/// Render the chat prompt for a problem, optionally with a hint block.
///
/// Without a hint the user turn is the bare statement. With a hint the
/// user turn keeps the template's line structure: statement, guiding
/// sentence, hint, each on its own line. `omega` records the hint ratio
/// in the returned spec and must be positive iff a hint is present.
pub fn render_prompt(problem: &Problem, hint: Option<&str>, omega: f64) -> Result<PromptSpec> {
    debug_assert_eq!(hint.is_none(), omega == 0.0);
    let rendered_text = match hint {
        None => format!(
            "{TEMPLATE_HEAD}{statement}<|im_end|>\n{TEMPLATE_TAIL}",
            statement = problem.statement
        ),
        Some(h) => {
            if problem.solution_trace.is_empty() {
                return Err(Error::NoSolutionTrace {
                    id: problem.id.clone(),
                });
            }
            format!(
                "{TEMPLATE_HEAD}{statement}\n{GUIDING_SENTENCE}\n{h}\n<|im_end|>\n{TEMPLATE_TAIL}",
                statement = problem.statement
            )
        }
    };
    Ok(PromptSpec {
        problem_id: problem.id.clone(),
        hint_ratio: omega,
        rendered_text,
    })
}

/// Advance one refinement stage: stage k -> k+1 at omega = schedule[k].
/// Reaching the final stage marks the state exhausted until a success
/// clears it.
pub fn advance_stage(state: &HintState, schedule: &[f64]) -> Result<HintState> {
    if state.exhausted || state.stage >= schedule.len() {
        return Err(Error::ScheduleExhausted { stage: state.stage });
    }
    let omega = schedule[state.stage];
    let stage = state.stage + 1;
    Ok(HintState {
        stage,
        omega,
        exhausted: stage == schedule.len(),
    })
}

/// True iff the cold-start gate suppresses detection at this step.
pub fn cold_start_gate(step_index: usize, n: usize) -> bool {
    step_index < n
}

/// Sample a group of G rollouts for one prompt and score each with the
/// verifier under the configured reward weights.
pub fn sample_group<P: Policy>(
    problem: &Problem,
    prompt: &PromptSpec,
    hint_state: &HintState,
    policy: &P,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> GroupSample {
    let mut rollouts = Vec::with_capacity(cfg.g);
    let mut rewards = Vec::with_capacity(cfg.g);
    for _ in 0..cfg.g {
        let rollout = policy.sample_rollout(problem, prompt, cfg, rng);
        rewards.push(verifier::score(&rollout.text, problem, cfg));
        rollouts.push(rollout);
    }
    GroupSample {
        problem_id: problem.id.clone(),
        hint_state: hint_state.clone(),
        rollouts,
        rewards,
    }
}

fn render_stage_prompt(problem: &Problem, state: &HintState) -> Result<PromptSpec> {
    if state.stage == 0 {
        render_prompt(problem, None, 0.0)
    } else {
        if problem.solution_trace.is_empty() {
            return Err(Error::NoSolutionTrace {
                id: problem.id.clone(),
            });
        }
        let hint = extract_hint(&problem.solution_trace, state.omega);
        render_prompt(problem, Some(&hint), state.omega)
    }
}

/// Within-step refinement: detect at omega = 0 and escalate through the
/// full schedule inside this step.
pub fn refine_and_resample<P: Policy>(
    problem: &Problem,
    policy: &P,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    step_index: usize,
) -> Result<RefinementOutcome> {
    let mut state = HintState::default();
    let prompt = render_stage_prompt(problem, &state)?;
    let mut group = sample_group(problem, &prompt, &state, policy, cfg, rng);
    let mut resample_count = 1;

    if cold_start_gate(step_index, cfg.cold_start_n) {
        return Ok(RefinementOutcome {
            final_group: group,
            hint_state: state,
            stages_used: 0,
            resample_count,
            was_difficult: false,
        });
    }
    let was_difficult = detect_difficult(&group.accuracy_rewards())?;
    if !was_difficult {
        return Ok(RefinementOutcome {
            final_group: group,
            hint_state: state,
            stages_used: 0,
            resample_count,
            was_difficult,
        });
    }

    let mut stages_used = 0;
    while !state.exhausted && state.stage < cfg.omega_schedule.len() {
        state = advance_stage(&state, &cfg.omega_schedule)?;
        stages_used += 1;
        let prompt = render_stage_prompt(problem, &state)?;
        group = sample_group(problem, &prompt, &state, policy, cfg, rng);
        resample_count += 1;
        if group.accuracy_rewards().iter().any(|a| *a > 0.0) {
            // Solved at this hint level: the query is no longer stuck.
            state.exhausted = false;
            break;
        }
    }
    if cfg.omega_schedule.is_empty() {
        // No stages exist; a difficult query is exhausted immediately.
        state.exhausted = true;
    }
    group.hint_state = state.clone();
    Ok(RefinementOutcome {
        final_group: group,
        hint_state: state,
        stages_used,
        resample_count,
        was_difficult,
    })
}

/// Across-epochs refinement: sample at the persisted hint level, advance
/// at most one stage per visit while difficult, reset to stage zero once
/// solved. `hint_state` in the outcome is the state to persist.
pub fn refine_and_resample_persistent<P: Policy>(
    problem: &Problem,
    prior: &HintState,
    policy: &P,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    step_index: usize,
) -> Result<RefinementOutcome> {
    let state = prior.clone();
    let prompt = render_stage_prompt(problem, &state)?;
    let mut group = sample_group(problem, &prompt, &state, policy, cfg, rng);
    let mut resample_count = 1;

    if cold_start_gate(step_index, cfg.cold_start_n) {
        return Ok(RefinementOutcome {
            final_group: group,
            hint_state: state,
            stages_used: 0,
            resample_count,
            was_difficult: false,
        });
    }
    let was_difficult = detect_difficult(&group.accuracy_rewards())?;
    if !was_difficult {
        // Solved at the persisted level: graduate back to no hint.
        return Ok(RefinementOutcome {
            final_group: group,
            hint_state: HintState::default(),
            stages_used: 0,
            resample_count,
            was_difficult,
        });
    }

    let mut state = state;
    let mut stages_used = 0;
    if !state.exhausted && state.stage < cfg.omega_schedule.len() {
        state = advance_stage(&state, &cfg.omega_schedule)?;
        stages_used = 1;
        let prompt = render_stage_prompt(problem, &state)?;
        group = sample_group(problem, &prompt, &state, policy, cfg, rng);
        resample_count += 1;
        if group.accuracy_rewards().iter().any(|a| *a > 0.0) {
            state = HintState::default();
        }
    } else if cfg.omega_schedule.is_empty() {
        state.exhausted = true;
    }
    group.hint_state = state.clone();
    Ok(RefinementOutcome {
        final_group: group,
        hint_state: state,
        stages_used,
        resample_count,
        was_difficult,
    })
}
