//! Group-relative policy optimization math.
//!
//! - group advantage: rewards standardized within each rollout group,
//!   `A_i = (R_i - mean) / (std + eps_norm)` with population std, so an
//!   all-equal group contributes exactly zero signal;
//! - importance ratio per token: `r_t = exp(logp_new - logp_old)`;
//! - clipped surrogate per token: `min(r * A, clamp(r, 1-eps, 1+eps) * A)`;
//! - optional KL penalty `beta * KL(pi || pi_ref)` under token-mean
//!   semantics, sharing the per-rollout `1/len` weighting of the
//!   surrogate term.
//!
//! The objective is averaged per rollout first (1/len over tokens), then
//! over all rollouts in the batch. [`assemble_loss`] evaluates values in
//! parallel and accumulates gradients sequentially in rollout order, so
//! parallel and sequential builds produce bit-identical gradients.

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::exec;
use crate::policy::Policy;
use crate::types::GroupSample;

/// Standardized advantages with the group statistics they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    pub advantages: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Standardize a group of rewards: `(R_i - mean) / (std + eps)` with
/// population std. Groups need at least two members to be relative.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Result<AdvantageSet> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall { got: rewards.len() });
    }
    let n = rewards.len() as f64;
    let mean = exec::neumaier_sum(rewards.iter().copied()) / n;
    let var = exec::neumaier_sum(rewards.iter().map(|r| {
        let d = r - mean;
        d * d
    })) / n;
    let std = var.sqrt();
    let denom = std + eps;
    let advantages = rewards.iter().map(|r| (r - mean) / denom).collect();
    Ok(AdvantageSet {
        advantages,
        mean,
        std,
    })
}

/// Per-token importance ratios `exp(new - old)`.
pub fn prob_ratio(logp_new: &[f64], logp_old: &[f64]) -> Result<Vec<f64>> {
    if logp_new.len() != logp_old.len() {
        return Err(Error::LengthMismatch {
            left: logp_new.len(),
            right: logp_old.len(),
        });
    }
    Ok(logp_new
        .iter()
        .zip(logp_old)
        .map(|(n, o)| (n - o).exp())
        .collect())
}

/// One clipped surrogate term: `min(r * a, clamp(r, 1-eps, 1+eps) * a)`.
pub fn clipped_token_term(ratio: f64, advantage: f64, eps_clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_clip, 1.0 + eps_clip);
    (ratio * advantage).min(clipped * advantage)
}

/// KL(p || q) for two categorical distributions over the same support.
/// Zero-probability entries in `p` contribute zero.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    exec::neumaier_sum(p.iter().zip(q).filter_map(|(pi, qi)| {
        if *pi <= 0.0 {
            None
        } else {
            Some(pi * (pi.ln() - qi.ln()))
        }
    }))
}

/// Outcome of a loss assembly over a batch of groups.
#[derive(Debug, Clone)]
pub struct LossReport {
    /// Mean clipped-surrogate objective minus the KL penalty (the
    /// quantity being ascended).
    pub objective: f64,
    /// Ascent gradient of the objective, dense over policy parameters.
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    /// Token-mean KL against the reference, before the beta weight.
    pub kl_value: f64,
    /// Rollouts skipped because they carried no tokens.
    pub skipped: usize,
}

struct RolloutTerm {
    group: usize,
    index: usize,
    len: usize,
    surrogate_mean: f64,
    kl_mean: f64,
    /// Per-token gradient weights w_t such that the surrogate gradient
    /// contribution is `sum_t w_t * grad logp(o_t)`, before the 1/N
    /// batch factor.
    weights: Vec<f64>,
}

/// Evaluate the hybrid objective and its ascent gradient over a batch.
///
/// Per rollout: tokens are averaged (1/len); per batch: rollouts are
/// averaged (1/N over non-empty rollouts). Ties between the unclipped
/// and clipped branch propagate the unclipped gradient.
pub fn assemble_loss<P: Policy>(
    groups: &[GroupSample],
    policy: &P,
    ref_params: &[f64],
    cfg: &TrainConfig,
) -> Result<LossReport> {
    if groups.is_empty() {
        return Err(Error::EmptyRewards);
    }
    let mut advantage_sets = Vec::with_capacity(groups.len());
    for g in groups {
        if g.rollouts.len() != g.rewards.len() {
            return Err(Error::LengthMismatch {
                left: g.rollouts.len(),
                right: g.rewards.len(),
            });
        }
        advantage_sets.push(group_advantages(&g.combined_rewards(), cfg.eps_norm)?);
    }

    let mut index: Vec<(usize, usize)> = Vec::new();
    let mut skipped = 0usize;
    for (gi, g) in groups.iter().enumerate() {
        for (ri, r) in g.rollouts.iter().enumerate() {
            if r.is_empty() {
                skipped += 1;
            } else {
                index.push((gi, ri));
            }
        }
    }
    let n_roll = index.len();
    if n_roll == 0 {
        return Ok(LossReport {
            objective: 0.0,
            gradient: vec![0.0; policy.num_params()],
            grad_norm: 0.0,
            kl_value: 0.0,
            skipped,
        });
    }

    let want_kl = cfg.beta_kl != 0.0;
    let terms: Vec<RolloutTerm> = exec::map_collect(&index, |&(gi, ri)| {
        let rollout = &groups[gi].rollouts[ri];
        let advantage = advantage_sets[gi].advantages[ri];
        let len = rollout.len();
        let logp_new = policy.token_logprobs(&rollout.prompt, &rollout.token_ids, cfg);
        let mut weights = vec![0.0; len];
        let mut surrogate = 0.0;
        for t in 0..len {
            let ratio = (logp_new[t] - rollout.logprob_old[t]).exp();
            let clipped = ratio.clamp(1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip);
            let unclipped_term = ratio * advantage;
            let clipped_term = clipped * advantage;
            if unclipped_term <= clipped_term {
                surrogate += unclipped_term;
                weights[t] = advantage * ratio;
            } else {
                surrogate += clipped_term;
                // Ratio sits outside the clip band: flat in the policy.
            }
        }
        let (kl, states) = policy.kl_sum(&rollout.prompt, &rollout.token_ids, ref_params, cfg);
        let kl_mean = if states > 0 { kl / states as f64 } else { 0.0 };
        RolloutTerm {
            group: gi,
            index: ri,
            len,
            surrogate_mean: surrogate / len as f64,
            kl_mean,
            weights,
        }
    });

    let n = n_roll as f64;
    let objective = exec::neumaier_sum(
        terms
            .iter()
            .map(|t| (t.surrogate_mean - cfg.beta_kl * t.kl_mean) / n),
    );
    let kl_value = exec::neumaier_sum(terms.iter().map(|t| t.kl_mean / n));

    // Sequential accumulation in rollout order keeps gradients
    // independent of the execution backend.
    let mut gradient = vec![0.0; policy.num_params()];
    for term in &terms {
        let rollout = &groups[term.group].rollouts[term.index];
        let scale = 1.0 / (n * term.len as f64);
        let scaled: Vec<f64> = term.weights.iter().map(|w| w * scale).collect();
        policy.accumulate_weighted_logprob_grad(
            &rollout.prompt,
            &rollout.token_ids,
            &scaled,
            cfg,
            &mut gradient,
        );
        if want_kl {
            policy.accumulate_kl_grad(
                &rollout.prompt,
                &rollout.token_ids,
                ref_params,
                cfg,
                -cfg.beta_kl / (n * term.len as f64),
                &mut gradient,
            );
        }
    }
    let grad_norm = exec::l2_norm(&gradient);
    Ok(LossReport {
        objective,
        gradient,
        grad_norm,
        kl_value,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::softmax::SoftmaxPolicy;
    use crate::policy::vocab::Vocab;
    use crate::rng::{stream, Domain};
    use crate::types::{Problem, PromptSpec, RewardBreakdown, Rollout};
    use proptest::prelude::*;

    #[test]
    fn advantage_single_success_case() {
        // Rewards [1, 0, 0, 0]: mean 0.25, population var 0.1875.
        let set = group_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-4).unwrap();
        let sigma = 0.1875f64.sqrt();
        let expect_hi = 0.75 / (sigma + 1e-4);
        let expect_lo = -0.25 / (sigma + 1e-4);
        assert!((set.advantages[0] - expect_hi).abs() < 1e-15);
        for i in 1..4 {
            assert!((set.advantages[i] - expect_lo).abs() < 1e-15);
        }
        assert!((set.advantages[0] - 1.7317).abs() < 1e-4);
        assert!((set.advantages[1] - (-0.5772)).abs() < 1e-4);
        assert!((set.mean - 0.25).abs() < 1e-15);
        assert!((set.std - sigma).abs() < 1e-15);
    }

    #[test]
    fn advantage_equal_rewards_all_zero() {
        let set = group_advantages(&[3.0, 3.0, 3.0], 1e-4).unwrap();
        assert_eq!(set.advantages, vec![0.0, 0.0, 0.0]);
        assert_eq!(set.std, 0.0);
    }

    #[test]
    fn advantage_rejects_tiny_groups() {
        assert!(matches!(
            group_advantages(&[1.0], 1e-4),
            Err(Error::GroupTooSmall { got: 1 })
        ));
        assert!(matches!(
            group_advantages(&[], 1e-4),
            Err(Error::GroupTooSmall { got: 0 })
        ));
    }

    #[test]
    fn ratio_and_mismatch() {
        let r = prob_ratio(&[0.0, -1.0], &[0.0, -2.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!((r[1] - 1.0f64.exp()).abs() < 1e-12);
        assert!(matches!(
            prob_ratio(&[0.0], &[0.0, 0.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn clip_pins_both_directions() {
        // Negative advantage, ratio below band: min picks the clipped arm.
        assert!((clipped_token_term(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-15);
        // Positive advantage, ratio above band.
        assert!((clipped_token_term(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        // Inside the band the term is untouched.
        assert!((clipped_token_term(1.1, 2.0, 0.2) - 2.2).abs() < 1e-15);
        assert!((clipped_token_term(0.9, -2.0, 0.2) - (-1.8)).abs() < 1e-15);
    }

    #[test]
    fn categorical_kl_known_value() {
        let kl = categorical_kl(&[0.9, 0.1], &[0.5, 0.5]);
        assert!((kl - 0.36806420716849715).abs() < 1e-15);
        assert!((kl - 0.3681).abs() < 1e-4);
        assert_eq!(categorical_kl(&[0.25, 0.75], &[0.25, 0.75]), 0.0);
    }

    proptest! {
        #[test]
        fn advantage_shift_invariant(
            rewards in proptest::collection::vec(0.0..3.0f64, 2..12),
            shift in -5.0..5.0f64,
        ) {
            let base = group_advantages(&rewards, 1e-4).unwrap();
            let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
            let moved = group_advantages(&shifted, 1e-4).unwrap();
            for (a, b) in base.advantages.iter().zip(&moved.advantages) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn advantages_sum_to_zero(
            rewards in proptest::collection::vec(0.0..3.0f64, 2..12),
        ) {
            let set = group_advantages(&rewards, 1e-4).unwrap();
            let s: f64 = set.advantages.iter().sum();
            prop_assert!(s.abs() < 1e-9);
        }
    }

    fn tiny_problem() -> Problem {
        Problem {
            id: "g0".into(),
            statement: "1+1=?".into(),
            solution_trace: "1+1=2".into(),
            answer: "2".into(),
            difficulty_level: None,
        }
    }

    fn sample_group(policy: &SoftmaxPolicy, rewards: &[f64], cfg: &TrainConfig) -> GroupSample {
        let prompt = PromptSpec {
            problem_id: "g0".into(),
            hint_ratio: 0.0,
            rendered_text: "1+1=?".into(),
        };
        let problem = tiny_problem();
        let rollouts: Vec<Rollout> = (0..rewards.len())
            .map(|i| {
                policy.sample_rollout(
                    &problem,
                    &prompt,
                    cfg,
                    &mut stream(9, Domain::Rollout, 0, i as u64, 0),
                )
            })
            .collect();
        let breakdown = rewards
            .iter()
            .map(|r| RewardBreakdown {
                accuracy: if *r >= 2.0 { 1 } else { 0 },
                format: if *r as i64 % 2 == 1 { 1 } else { 0 },
                combined: *r,
            })
            .collect();
        GroupSample {
            problem_id: "g0".into(),
            hint_state: Default::default(),
            rollouts,
            rewards: breakdown,
        }
    }

    #[test]
    fn equal_rewards_zero_gradient() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 12;
        let group = sample_group(&policy, &[2.0, 2.0, 2.0, 2.0], &cfg);
        let report = assemble_loss(&[group], &policy, policy.params(), &cfg).unwrap();
        assert_eq!(report.grad_norm, 0.0);
        assert!(report.gradient.iter().all(|g| *g == 0.0));
        assert!(report.objective.abs() < 1e-15);
    }

    #[test]
    fn mixed_rewards_nonzero_gradient_and_unit_ratio_objective() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 12;
        let group = sample_group(&policy, &[3.0, 0.0, 0.0, 0.0], &cfg);
        let report = assemble_loss(&[group.clone()], &policy, policy.params(), &cfg).unwrap();
        assert!(report.grad_norm > 0.0);
        // At the sampling parameters every ratio is 1, so the objective
        // equals the mean advantage: zero by standardization.
        assert!(report.objective.abs() < 1e-12, "{}", report.objective);
        assert!(report.kl_value.abs() < 1e-15);
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn reinforce_equivalence_at_unit_ratio() {
        // With ratios at 1 and beta 0 the gradient reduces to
        // (1/N) sum_i (A_i / L_i) sum_t grad logp(o_t).
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 10;
        let rewards = [3.0, 1.0, 0.0, 2.0];
        let group = sample_group(&policy, &rewards, &cfg);
        let report = assemble_loss(&[group.clone()], &policy, policy.params(), &cfg).unwrap();

        let combined: Vec<f64> = rewards.to_vec();
        let adv = group_advantages(&combined, cfg.eps_norm).unwrap();
        let n = group.rollouts.len() as f64;
        let mut expect = vec![0.0; policy.num_params()];
        for (i, rollout) in group.rollouts.iter().enumerate() {
            let w = adv.advantages[i] / (n * rollout.len() as f64);
            let weights = vec![w; rollout.len()];
            policy.accumulate_weighted_logprob_grad(
                &rollout.prompt,
                &rollout.token_ids,
                &weights,
                &cfg,
                &mut expect,
            );
        }
        for (a, b) in report.gradient.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_logprobs_trigger_clipping() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 8;
        cfg.eps_clip = 0.2;
        let mut group = sample_group(&policy, &[3.0, 0.0, 0.0, 0.0], &cfg);
        // Pretend the rollouts came from a much less likely policy: the
        // ratio exp(new - old) blows past 1 + eps and the positive
        // advantage arm must clip (objective capped, weight zeroed).
        for r in &mut group.rollouts {
            for lp in &mut r.logprob_old {
                *lp -= 1.0;
            }
        }
        let report = assemble_loss(&[group.clone()], &policy, policy.params(), &cfg).unwrap();
        let adv = group_advantages(&group.combined_rewards(), cfg.eps_norm).unwrap();
        // Ratio is e for every token. Positive-advantage rollout clips to
        // 1.2 * A; negative-advantage rollouts keep ratio * A.
        let e = 1.0f64.exp();
        let expect: f64 = adv
            .advantages
            .iter()
            .map(|a| if *a > 0.0 { 1.2 * a } else { e * a })
            .sum::<f64>()
            / 4.0;
        assert!((report.objective - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_rollouts_are_skipped() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 8;
        let mut group = sample_group(&policy, &[3.0, 0.0, 0.0, 0.0], &cfg);
        group.rollouts[2].token_ids.clear();
        group.rollouts[2].logprob_old.clear();
        let report = assemble_loss(&[group], &policy, policy.params(), &cfg).unwrap();
        assert_eq!(report.skipped, 1);
        assert!(report.grad_norm > 0.0);
    }

    #[test]
    fn empty_batch_rejected() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let cfg = TrainConfig::default();
        assert!(matches!(
            assemble_loss(&[], &policy, policy.params(), &cfg),
            Err(Error::EmptyRewards)
        ));
    }

    #[test]
    fn kl_penalty_shifts_objective() {
        let policy = SoftmaxPolicy::new(Vocab::standard());
        let mut cfg = TrainConfig::default();
        cfg.max_tokens = 8;
        let group = sample_group(&policy, &[3.0, 0.0, 0.0, 0.0], &cfg);
        // Non-constant noise in every logit row: the reference
        // distribution differs from uniform at every visited state.
        let refp: Vec<f64> = (0..policy.num_params())
            .map(|i| 0.3 * ((i % 7) as f64 - 3.0))
            .collect();
        cfg.beta_kl = 0.0;
        let free = assemble_loss(&[group.clone()], &policy, &refp, &cfg).unwrap();
        cfg.beta_kl = 0.5;
        let penalized = assemble_loss(&[group], &policy, &refp, &cfg).unwrap();
        assert!(free.kl_value > 0.0);
        assert!((penalized.objective - (free.objective - 0.5 * free.kl_value)).abs() < 1e-12);
        assert!(penalized.grad_norm != free.grad_norm);
    }
}
