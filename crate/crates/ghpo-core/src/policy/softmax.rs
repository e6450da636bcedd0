//! Exact-gradient tabular softmax policy.
//!
//! Context features are (previous token id, position bucket), keeping the
//! policy finite and every log-probability gradient analytic:
//!
//! - distribution: `softmax(theta[feature] / temperature)`;
//! - `d log pi(o|s) / d theta[feature(s), j] = (1[j=o] - p_j) / T`;
//! - per-state KL gradient: `p_k (ln(p_k/q_k) - KL) / T`.
//!
//! Hints condition the policy through the rendered prompt: prompt tokens
//! shift the (previous token) feature of the first response position, and
//! the policy table is shared across all positions past the last bucket.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::vocab::Vocab;
use super::Policy;
use crate::config::TrainConfig;
use crate::types::{Problem, PromptSpec, Rollout};

/// Number of position buckets in the context feature.
pub const POS_BUCKETS: usize = 8;
/// Response positions per bucket; positions past the last bucket share it.
const BUCKET_WIDTH: usize = 4;

/// Tabular softmax policy with parameter matrix (feature, token).
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    vocab: Vocab,
    theta: Vec<f64>,
}

impl SoftmaxPolicy {
    /// Zero-initialized table: the uniform policy.
    pub fn new(vocab: Vocab) -> Self {
        let n = vocab.len() * POS_BUCKETS * vocab.len();
        Self {
            vocab,
            theta: vec![0.0; n],
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn num_features(&self) -> usize {
        self.vocab.len() * POS_BUCKETS
    }

    /// Context feature row for (previous token, response position).
    pub fn feature(&self, prev_token: usize, position: usize) -> usize {
        let bucket = (position / BUCKET_WIDTH).min(POS_BUCKETS - 1);
        prev_token * POS_BUCKETS + bucket
    }

    /// Set one logit entry; test and demo hook.
    pub fn set_logit(&mut self, feature: usize, token: usize, value: f64) {
        let v = self.vocab.len();
        self.theta[feature * v + token] = value;
    }

    /// Probability vector over the vocabulary for a feature row.
    pub fn distribution_for_feature(&self, feature: usize, temperature: f64) -> Vec<f64> {
        Self::softmax_row(&self.theta, self.vocab.len(), feature, temperature)
    }

    fn softmax_row(theta: &[f64], v: usize, feature: usize, temperature: f64) -> Vec<f64> {
        let row = &theta[feature * v..(feature + 1) * v];
        let mut z: Vec<f64> = row.iter().map(|&x| x / temperature).collect();
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in z.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in z.iter_mut() {
            *x /= sum;
        }
        z
    }

    /// Previous-token context for each response position of `token_ids`.
    fn contexts(&self, prompt: &PromptSpec, token_ids: &[usize]) -> Vec<usize> {
        let prompt_ids = self.vocab.encode(&prompt.rendered_text);
        let first_prev = prompt_ids.last().copied().unwrap_or(self.vocab.eos_id());
        let mut prev = first_prev;
        token_ids
            .iter()
            .enumerate()
            .map(|(t, &id)| {
                let f = self.feature(prev, t);
                prev = id;
                f
            })
            .collect()
    }

    /// Distribution over the vocabulary given prompt and response prefix.
    pub fn token_distribution(
        &self,
        prompt: &PromptSpec,
        prefix: &[usize],
        temperature: f64,
    ) -> Vec<f64> {
        let prompt_ids = self.vocab.encode(&prompt.rendered_text);
        let prev = prefix
            .last()
            .copied()
            .or_else(|| prompt_ids.last().copied())
            .unwrap_or(self.vocab.eos_id());
        let feature = self.feature(prev, prefix.len());
        self.distribution_for_feature(feature, temperature)
    }
}

impl Policy for SoftmaxPolicy {
    fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.theta.len());
        self.theta.copy_from_slice(params);
    }

    fn sample_rollout(
        &self,
        _problem: &Problem,
        prompt: &PromptSpec,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Rollout {
        let v = self.vocab.len();
        let prompt_ids = self.vocab.encode(&prompt.rendered_text);
        let mut prev = prompt_ids.last().copied().unwrap_or(self.vocab.eos_id());
        let mut token_ids = Vec::new();
        let mut logprob_old = Vec::new();
        for t in 0..cfg.max_tokens {
            let feature = self.feature(prev, t);
            let probs = Self::softmax_row(&self.theta, v, feature, cfg.temperature);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = v - 1;
            for (j, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = j;
                    break;
                }
            }
            token_ids.push(chosen);
            logprob_old.push(probs[chosen].ln());
            if chosen == self.vocab.eos_id() {
                break;
            }
            prev = chosen;
        }
        let text = self.vocab.decode(&token_ids);
        Rollout {
            prompt: prompt.clone(),
            token_ids,
            text,
            logprob_old,
        }
    }

    fn token_logprobs(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        cfg: &TrainConfig,
    ) -> Vec<f64> {
        let v = self.vocab.len();
        self.contexts(prompt, token_ids)
            .iter()
            .zip(token_ids)
            .map(|(&f, &id)| {
                Self::softmax_row(&self.theta, v, f, cfg.temperature)[id].ln()
            })
            .collect()
    }

    fn accumulate_weighted_logprob_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        weights: &[f64],
        cfg: &TrainConfig,
        out: &mut [f64],
    ) {
        debug_assert_eq!(token_ids.len(), weights.len());
        let v = self.vocab.len();
        for ((&f, &id), &w) in self.contexts(prompt, token_ids).iter().zip(token_ids).zip(weights)
        {
            if w == 0.0 {
                continue;
            }
            let probs = Self::softmax_row(&self.theta, v, f, cfg.temperature);
            let base = f * v;
            for (j, &p) in probs.iter().enumerate() {
                let indicator = (j == id) as u8 as f64;
                out[base + j] += w * (indicator - p) / cfg.temperature;
            }
        }
    }

    fn kl_sum(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        cfg: &TrainConfig,
    ) -> (f64, usize) {
        let v = self.vocab.len();
        let mut total = 0.0;
        let contexts = self.contexts(prompt, token_ids);
        for &f in &contexts {
            let p = Self::softmax_row(&self.theta, v, f, cfg.temperature);
            let q = Self::softmax_row(ref_params, v, f, cfg.temperature);
            let mut kl = 0.0;
            for (pj, qj) in p.iter().zip(&q) {
                kl += pj * (pj.ln() - qj.ln());
            }
            total += kl;
        }
        (total, contexts.len())
    }

    fn accumulate_kl_grad(
        &self,
        prompt: &PromptSpec,
        token_ids: &[usize],
        ref_params: &[f64],
        cfg: &TrainConfig,
        scale: f64,
        out: &mut [f64],
    ) {
        let v = self.vocab.len();
        for &f in &self.contexts(prompt, token_ids) {
            let p = Self::softmax_row(&self.theta, v, f, cfg.temperature);
            let q = Self::softmax_row(ref_params, v, f, cfg.temperature);
            let mut kl = 0.0;
            for (pj, qj) in p.iter().zip(&q) {
                kl += pj * (pj.ln() - qj.ln());
            }
            let base = f * v;
            for (j, (pj, qj)) in p.iter().zip(&q).enumerate() {
                out[base + j] += scale * pj * ((pj.ln() - qj.ln()) - kl) / cfg.temperature;
            }
        }
    }
}
