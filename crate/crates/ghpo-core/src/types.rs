//! Shared domain types: problems, prompts, rollouts, rewards, groups,
//! hint state, and per-step run metrics.
//!
//! All types are immutable value objects after construction and safe to
//! share across threads. Invariants documented per type are enforced by
//! the constructors or by the loaders that produce them.

use serde::{Deserialize, Serialize};

/// A verifiable task: statement, ground-truth solution trace, canonical answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    /// Unique id within a dataset.
    pub id: String,
    /// The query text shown to the policy.
    pub statement: String,
    /// Step-by-step ground-truth solution; source of hint prefixes.
    #[serde(rename = "solution")]
    pub solution_trace: String,
    /// Ground-truth answer in canonical form.
    pub answer: String,
    /// Dataset metadata tag; the training controller never reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_level: Option<i64>,
}

impl Problem {
    /// Check the record invariants (non-empty statement and answer).
    pub fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.statement.is_empty() {
            return Err("empty statement".into());
        }
        if self.answer.is_empty() {
            return Err("empty answer".into());
        }
        Ok(())
    }
}

/// A rendered query: the original problem plus an optional hint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub problem_id: String,
    /// Hint ratio in [0, 1]; 0 means no hint block is present.
    pub hint_ratio: f64,
    /// Full template-rendered prompt text.
    pub rendered_text: String,
}

/// One sampled response with the log-probabilities it was drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub prompt: PromptSpec,
    /// Sampled token ids, in order.
    pub token_ids: Vec<usize>,
    /// Rendered response text as the verifier sees it.
    pub text: String,
    /// Per-token log-probability under the sampling policy, all <= 0.
    pub logprob_old: Vec<f64>,
}

impl Rollout {
    /// Response length in tokens.
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Binary reward components and their configured weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// 1 iff the extracted answer matches the ground truth.
    pub accuracy: u8,
    /// 1 iff the response follows the think/answer template.
    pub format: u8,
    /// `w_acc * accuracy + w_fmt * format`.
    pub combined: f64,
}

impl RewardBreakdown {
    pub fn new(accuracy: u8, format: u8, w_acc: f64, w_fmt: f64) -> Self {
        debug_assert!(accuracy <= 1 && format <= 1);
        Self {
            accuracy,
            format,
            combined: w_acc * accuracy as f64 + w_fmt * format as f64,
        }
    }
}

/// Hint refinement stage for one query.
///
/// Stage 0 means no hint (omega 0); stage k >= 1 means omega equals
/// `schedule[k-1]`. `exhausted` marks a query whose final-stage group was
/// still all-incorrect at the last detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HintState {
    pub stage: usize,
    pub omega: f64,
    pub exhausted: bool,
}

impl HintState {
    /// Fresh state: stage 0, no hint, not exhausted.
    pub fn new() -> Self {
        Self {
            stage: 0,
            omega: 0.0,
            exhausted: false,
        }
    }
}

impl Default for HintState {
    fn default() -> Self {
        Self::new()
    }
}

/// One query's G rollouts and their reward breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub problem_id: String,
    pub hint_state: HintState,
    pub rollouts: Vec<Rollout>,
    pub rewards: Vec<RewardBreakdown>,
}

impl GroupSample {
    /// Accuracy rewards as 0/1 reals, in rollout order.
    pub fn accuracy_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.accuracy as f64).collect()
    }

    /// Combined rewards, in rollout order.
    pub fn combined_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.combined).collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean(self.rewards.iter().map(|r| r.accuracy as f64))
    }

    pub fn mean_format(&self) -> f64 {
        mean(self.rewards.iter().map(|r| r.format as f64))
    }

    pub fn mean_response_length(&self) -> f64 {
        mean(self.rollouts.iter().map(|r| r.len() as f64))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-step monitoring record.
///
/// Serialized names match the metrics CSV header columns exactly, so the
/// JSON-lines mirror and the CSV stay key-compatible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub step: usize,
    pub lr: f64,
    #[serde(rename = "format_reward")]
    pub mean_format_reward: f64,
    #[serde(rename = "accuracy_reward")]
    pub mean_accuracy_reward: f64,
    #[serde(rename = "mean_resp_len")]
    pub mean_response_length: f64,
    pub grad_norm: f64,
    /// Fraction of the batch detected difficult at stage 0 (0 during cold start).
    pub difficult_fraction: f64,
    /// Total group samplings this step across the batch; equals the
    /// batch size when no refinement occurred.
    pub resample_count: usize,
}
