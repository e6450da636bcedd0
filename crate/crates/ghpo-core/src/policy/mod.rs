//! Pluggable toy policies over the token-level MDP.
//!
//! Two implementations ship:
//! - [`softmax::SoftmaxPolicy`]: an exact-gradient tabular softmax policy
//!   whose context features are (previous token, position bucket);
//! - [`sim::SimPolicy`]: a fast analytic surrogate whose success
//!   probability is a logistic in capability, difficulty, and hint ratio.
//!
//! The [`Policy`] trait exposes exactly what the loss assembly needs:
//! sampling, per-token log-probabilities under the current parameters,
//! weighted log-probability gradients, and per-state KL against a frozen
//! reference parameter vector. Policies are read-only during sampling and
//! loss evaluation; parameter updates take `&mut self` between phases.

pub mod sim;
pub mod softmax;
pub mod synth;
pub mod vocab;

use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::types::{Problem, PromptSpec, Rollout};

/// A differentiable policy with a flat parameter vector.
pub trait Policy: Sync {
    /// Parameter count; all gradient buffers carry this length.
    fn num_params(&self) -> usize;

    /// Current parameters as a flat slice.
    fn params(&self) -> &[f64];

    /// Overwrite parameters (optimizer update or checkpoint restore).
    fn set_params(&mut self, params: &[f64]);

    /// Sample one response for a rendered prompt. Deterministic given
    /// (parameters, prompt, rng stream); records per-token sampling
    /// log-probabilities in `logprob_old`.
    fn sample_rollout(
        &self,
        problem: &Problem,
        prompt: &PromptSpec,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Rollout;

    /// Log-probability of each stored token under the CURRENT parameters,
    /// conditioned on the same prompt the rollout was sampled from.
    fn token_logprobs(&self, prompt: &PromptSpec, token_ids: &[usize], cfg: &TrainConfig)
        -> Vec<f64>;

    /// Accumulate `sum_t weights[t] * grad(log pi(token_t | state_t))`
    /// into `out` (length `num_params`).
    fn accumulate_weighted_logprob_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        weights: &[f64],
        cfg: &TrainConfig,
        out: &mut [f64],
    );

    /// Sum over this rollout's visited states of
    /// `KL(pi_theta(.|s) || pi_ref(.|s))` plus the number of states.
    fn kl_sum(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        cfg: &TrainConfig,
    ) -> (f64, usize);

    /// Accumulate `scale * grad(kl_sum)` w.r.t. the current parameters
    /// into `out`.
    fn accumulate_kl_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        cfg: &TrainConfig,
        scale: f64,
        out: &mut [f64],
    );
}
