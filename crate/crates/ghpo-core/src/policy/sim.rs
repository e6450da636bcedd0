//! Fast analytic simulation policy.
//!
//! Success on a problem of difficulty `d` under hint ratio `omega` is a
//! Bernoulli draw with probability
//! `sigmoid(alpha*(capability - d) + gamma*omega + kappa*W[path])`, where
//! `path` is a per-rollout trajectory bucket drawn uniformly from a large
//! pool. Format compliance is a second Bernoulli with probability
//! `sigmoid(phi)`. Trainable state is `[capability, phi, W[0..paths]]`:
//!
//! - `capability` moves with `alpha`-scaled success feedback, shared by
//!   every rollout;
//! - `phi` is the format head, learned from format rewards alone;
//! - `W` are per-path weights; distinct rollouts touch distinct
//!   coordinates, so group contributions combine in quadrature rather
//!   than coherently.
//!
//! The documented success-probability contract
//! [`sim_success_prob`]`(c, alpha, gamma, d, omega)` omits the path term
//! and matches the policy exactly at initialization (W = 0).
//!
//! Response texts are real template strings scored by the verifier, so
//! the reward path is identical to the one the softmax policy exercises:
//! a success carries the ground-truth boxed answer, a failure a wrong
//! one, and only format-compliant draws wrap the answer in think/answer
//! blocks. Successful responses are long (hints stretch them further);
//! failures are short. Token ids encode the two decisions and the path
//! so log-probabilities are recomputable under any parameter vector.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Policy;
use crate::config::TrainConfig;
use crate::types::{Problem, PromptSpec, Rollout};

/// Filler token id for positions past the decision header.
const TOK_FILLER: usize = 2;
/// First token id used to encode the path bucket.
const TOK_PATH_BASE: usize = 3;

/// Logistic success probability without the path term: the documented
/// simulation contract, strictly increasing in capability and omega,
/// decreasing in difficulty.
pub fn sim_success_prob(capability: f64, alpha: f64, gamma: f64, difficulty: f64, omega: f64) -> f64 {
    sigmoid(alpha * (capability - difficulty) + gamma * omega)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(sigmoid(z)), stable for large |z|.
fn log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Structural constants of the simulated environment (not trainable).
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    /// Difficulty sensitivity of the success logistic (> 0).
    pub alpha: f64,
    /// Hint sensitivity of the success logistic (>= 0).
    pub gamma: f64,
    /// Path-weight sensitivity of the success logistic.
    pub kappa: f64,
    /// Number of per-trajectory path buckets.
    pub paths: usize,
    /// Initial capability.
    pub capability0: f64,
    /// Success response length: (base0 + base1 * d) * (1 + hint_mult * omega).
    pub len_base0: f64,
    pub len_base1: f64,
    pub len_hint_mult: f64,
    /// Failure response length (failures are short).
    pub len_fail: f64,
    /// Std of the Gaussian length noise.
    pub len_noise: f64,
    /// Lower clamp on response length.
    pub min_len: usize,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            alpha: 8.0,
            gamma: 64.0,
            kappa: 3.0,
            paths: 8192,
            capability0: 2.0,
            len_base0: 8.0,
            len_base1: 12.0,
            len_hint_mult: 3.0,
            len_fail: 12.0,
            len_noise: 2.0,
            min_len: 4,
        }
    }
}

/// Analytic simulation policy over a per-problem difficulty table.
#[derive(Debug, Clone)]
pub struct SimPolicy {
    scenario: SimScenario,
    difficulty: HashMap<String, f64>,
    /// [capability, phi, W[0..paths]].
    params: Vec<f64>,
}

impl SimPolicy {
    pub fn new(scenario: SimScenario, difficulty: HashMap<String, f64>) -> Self {
        assert!(scenario.alpha > 0.0, "alpha must be > 0");
        assert!(scenario.gamma >= 0.0, "gamma must be >= 0");
        assert!(scenario.paths >= 1, "need at least one path bucket");
        let mut params = vec![0.0; 2 + scenario.paths];
        params[0] = scenario.capability0;
        Self {
            scenario,
            difficulty,
            params,
        }
    }

    pub fn scenario(&self) -> &SimScenario {
        &self.scenario
    }

    pub fn capability(&self) -> f64 {
        self.params[0]
    }

    fn difficulty_of(&self, problem_id: &str) -> f64 {
        self.difficulty.get(problem_id).copied().unwrap_or(0.0)
    }

    /// Success probability for a concrete (problem, omega, path) triple
    /// under the current parameters.
    fn path_success_prob(&self, difficulty: f64, omega: f64, path: usize) -> f64 {
        let z = self.scenario.alpha * (self.params[0] - difficulty)
            + self.scenario.gamma * omega
            + self.scenario.kappa * self.params[2 + path];
        sigmoid(z)
    }

    fn format_prob(&self) -> f64 {
        sigmoid(self.params[1])
    }

    /// (accuracy decision, format decision, path) recovered from tokens.
    fn decode_header(&self, token_ids: &[usize]) -> Option<(bool, bool, usize)> {
        if token_ids.len() < 3 {
            return None;
        }
        let path = token_ids[2].checked_sub(TOK_PATH_BASE)?;
        if path >= self.scenario.paths {
            return None;
        }
        Some((token_ids[0] == 1, token_ids[1] == 1, path))
    }

    fn response_text(problem: &Problem, acc: bool, fmt: bool) -> String {
        let answer = if acc {
            problem.answer.clone()
        } else {
            // Appending a digit changes every numeric and symbolic value.
            format!("{}1", problem.answer)
        };
        if fmt {
            let trace: String = if problem.solution_trace.is_empty() {
                "steps".to_string()
            } else {
                problem.solution_trace.chars().take(24).collect()
            };
            format!("<think>{trace}</think><answer>\\boxed{{{answer}}}</answer>")
        } else {
            format!("\\boxed{{{answer}}}")
        }
    }
}

impl Policy for SimPolicy {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len());
        self.params.copy_from_slice(params);
    }

    fn sample_rollout(
        &self,
        problem: &Problem,
        prompt: &PromptSpec,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Rollout {
        let d = self.difficulty_of(&problem.id);
        let omega = prompt.hint_ratio;
        // Fixed draw order: path, accuracy uniform, format uniform, noise.
        let path = rng.gen_range(0..self.scenario.paths);
        let p_acc = self.path_success_prob(d, omega, path);
        let acc = rng.gen::<f64>() < p_acc;
        let p_fmt = self.format_prob();
        let fmt = rng.gen::<f64>() < p_fmt;
        let noise = Normal::new(0.0, self.scenario.len_noise)
            .expect("positive noise std")
            .sample(rng);
        let raw_len = if acc {
            (self.scenario.len_base0 + self.scenario.len_base1 * d)
                * (1.0 + self.scenario.len_hint_mult * omega)
                + noise
        } else {
            self.scenario.len_fail + noise
        };
        let len = (raw_len.round() as i64)
            .max(self.scenario.min_len as i64)
            .min(cfg.max_tokens as i64)
            .max(0) as usize;
        let mut token_ids = Vec::with_capacity(len);
        let mut logprob_old = Vec::with_capacity(len);
        if len >= 3 {
            token_ids.push(acc as usize);
            logprob_old.push(if acc { p_acc.ln() } else { (1.0 - p_acc).ln() });
            token_ids.push(fmt as usize);
            logprob_old.push(if fmt { p_fmt.ln() } else { (1.0 - p_fmt).ln() });
            token_ids.push(TOK_PATH_BASE + path);
            logprob_old.push(0.0);
            for _ in 3..len {
                token_ids.push(TOK_FILLER);
                logprob_old.push(0.0);
            }
        }
        Rollout {
            prompt: prompt.clone(),
            text: Self::response_text(problem, acc, fmt),
            token_ids,
            logprob_old,
        }
    }

    fn token_logprobs(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        _cfg: &TrainConfig,
    ) -> Vec<f64> {
        let mut out = vec![0.0; token_ids.len()];
        if let Some((acc, fmt, path)) = self.decode_header(token_ids) {
            let d = self.difficulty_of(&prompt.problem_id);
            let z = self.scenario.alpha * (self.params[0] - d)
                + self.scenario.gamma * prompt.hint_ratio
                + self.scenario.kappa * self.params[2 + path];
            out[0] = if acc { log_sigmoid(z) } else { log_sigmoid(-z) };
            let phi = self.params[1];
            out[1] = if fmt { log_sigmoid(phi) } else { log_sigmoid(-phi) };
        }
        out
    }

    fn accumulate_weighted_logprob_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        weights: &[f64],
        _cfg: &TrainConfig,
        out: &mut [f64],
    ) {
        debug_assert_eq!(token_ids.len(), weights.len());
        let Some((acc, fmt, path)) = self.decode_header(token_ids) else {
            return;
        };
        let d = self.difficulty_of(&prompt.problem_id);
        let p_acc = self.path_success_prob(d, prompt.hint_ratio, path);
        let s_acc = if acc { 1.0 - p_acc } else { -p_acc };
        out[0] += weights[0] * self.scenario.alpha * s_acc;
        out[2 + path] += weights[0] * self.scenario.kappa * s_acc;
        let p_fmt = self.format_prob();
        let s_fmt = if fmt { 1.0 - p_fmt } else { -p_fmt };
        out[1] += weights[1] * s_fmt;
    }

    fn kl_sum(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        _cfg: &TrainConfig,
    ) -> (f64, usize) {
        let Some((_, _, path)) = self.decode_header(token_ids) else {
            return (0.0, token_ids.len());
        };
        let d = self.difficulty_of(&prompt.problem_id);
        let p = self.path_success_prob(d, prompt.hint_ratio, path);
        let q = {
            let z = self.scenario.alpha * (ref_params[0] - d)
                + self.scenario.gamma * prompt.hint_ratio
                + self.scenario.kappa * ref_params[2 + path];
            sigmoid(z)
        };
        let pf = self.format_prob();
        let qf = sigmoid(ref_params[1]);
        (bern_kl(p, q) + bern_kl(pf, qf), token_ids.len())
    }

    fn accumulate_kl_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        _cfg: &TrainConfig,
        scale: f64,
        out: &mut [f64],
    ) {
        let Some((_, _, path)) = self.decode_header(token_ids) else {
            return;
        };
        let d = self.difficulty_of(&prompt.problem_id);
        let p = self.path_success_prob(d, prompt.hint_ratio, path);
        let q = {
            let z = self.scenario.alpha * (ref_params[0] - d)
                + self.scenario.gamma * prompt.hint_ratio
                + self.scenario.kappa * ref_params[2 + path];
            sigmoid(z)
        };
        // dKL/dz = p(1-p) * (ln(p/q) - ln((1-p)/(1-q))).
        let dkl_dz = p * (1.0 - p) * ((p.ln() - q.ln()) - ((1.0 - p).ln() - (1.0 - q).ln()));
        out[0] += scale * self.scenario.alpha * dkl_dz;
        out[2 + path] += scale * self.scenario.kappa * dkl_dz;
        let pf = self.format_prob();
        let qf = sigmoid(ref_params[1]);
        let dklf = pf * (1.0 - pf) * ((pf.ln() - qf.ln()) - ((1.0 - pf).ln() - (1.0 - qf).ln()));
        out[1] += scale * dklf;
    }
}

/// KL between Bernoulli(p) and Bernoulli(q).
fn bern_kl(p: f64, q: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    let q = q.clamp(1e-300, 1.0 - 1e-16);
    p * (p.ln() - q.ln()) + (1.0 - p) * ((1.0 - p).ln() - (1.0 - q).ln())
}
