//! Desk-scale laboratory for GHPO (Guided Hybrid Policy Optimization)
//! and its GRPO baseline: group-relative advantages, automatic
//! difficulty detection, staged hint-guided prompt refinement, and a
//! hybrid clipped policy-gradient objective, exercised against toy
//! differentiable policies and a simulated verifiable-task environment.
//!
//! Algorithm in one pass:
//!
//! - sample a group of G rollouts per query and score each with a
//!   rule-based verifier (binary accuracy + binary format, weighted
//!   into a combined reward);
//! - standardize rewards within the group (`grpo::group_advantages`);
//!   an all-equal group contributes exactly zero gradient, which is the
//!   failure mode GHPO exists to fix;
//! - when every accuracy reward in a group is zero, the query is
//!   "difficult": re-render its prompt with a growing prefix of the
//!   ground-truth solution (hint ratios 0.25 -> 0.5 -> 0.75) and
//!   resample until something succeeds or the schedule is exhausted
//!   (`control::refine_and_resample`);
//! - optimize the clipped surrogate objective with optional KL penalty
//!   (`grpo::assemble_loss`) via AdamW under a cosine learning-rate
//!   schedule with warmup, gating detection off for the first
//!   `cold_start_N` steps (`trainer`).
//!
//! Policies implement [`policy::Policy`] with exact log-probabilities
//! and gradients: a tabular softmax token policy for gradient-level
//! verification and a fast analytic simulation policy for
//! training-dynamics studies ([`compare::simulate_compare`]).
//!
//! The `parallel` feature (default on) runs sampling and loss
//! evaluation on a rayon pool; disabling it yields a fully sequential
//! build. Both produce bit-identical results by construction: rng
//! streams are counter-derived per (step, query) and gradient
//! accumulation is ordered.

pub mod compare;
pub mod config;
pub mod control;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod grpo;
pub mod metrics;
pub mod optimizer;
pub mod policy;
pub mod rng;
pub mod schedule;
pub mod trainer;
pub mod types;
pub mod verifier;

pub use config::{EscalationMode, TrainConfig};
pub use error::{Error, Result};
pub use types::{
    GroupSample, HintState, Problem, PromptSpec, RewardBreakdown, Rollout, RunMetrics,
};
