//! Run configuration: the `TrainConfig` record, its validation, and the
//! flat key-value config-file format.
//!
//! File format: one `key = value` pair per line, `#` starts a comment,
//! blank lines ignored. Keys mirror the `TrainConfig` field names exactly
//! (`G`, `batch_size`, ..., `cold_start_N`); unknown or duplicate keys are
//! errors, so silent typos cannot change a run. Values omitted from the
//! file keep their desk-scale defaults. `omega_schedule` is a
//! comma-separated list; an empty value disables hints entirely, which is
//! exactly the GRPO baseline.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When hint escalation may advance a query's stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationMode {
    /// Re-rollout with a larger hint inside the same training step until
    /// one rollout succeeds or the schedule is exhausted (default).
    WithinStep,
    /// Persist each query's hint stage between dataset visits and advance
    /// it at most once per visit.
    AcrossEpochs,
}

impl EscalationMode {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "within_step" => Some(Self::WithinStep),
            "across_epochs" => Some(Self::AcrossEpochs),
            _ => None,
        }
    }
}

/// Full training-run configuration.
///
/// Serialized names equal the config-file keys; `G` and `cold_start_N`
/// keep their algorithm-note capitalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Group size: rollouts sampled per query, the advantage-normalization unit.
    #[serde(rename = "G")]
    pub g: usize,
    /// Queries per optimization step.
    pub batch_size: usize,
    /// Micro-batches the batch is split into before the single update.
    pub grad_accum_steps: usize,
    /// Peak learning rate reached at the end of warmup.
    pub lr0: f64,
    /// Fraction of total steps spent on the linear warmup ramp.
    pub warmup_frac: f64,
    /// Total optimization steps.
    pub total_steps: usize,
    /// Softmax sampling temperature.
    pub temperature: f64,
    /// Hard cap on response length in tokens.
    pub max_tokens: usize,
    /// Epsilon added to the reward std in advantage standardization.
    pub eps_norm: f64,
    /// Clip half-width of the surrogate objective ratio.
    pub eps_clip: f64,
    /// KL-penalty coefficient against the frozen reference policy.
    pub beta_kl: f64,
    /// Weight of the accuracy reward in the combined reward.
    pub w_acc: f64,
    /// Weight of the format reward in the combined reward.
    pub w_fmt: f64,
    /// Hint-ratio stages; empty disables hint refinement (GRPO baseline).
    pub omega_schedule: Vec<f64>,
    /// Optimization steps with difficulty detection disabled at run start.
    #[serde(rename = "cold_start_N")]
    pub cold_start_n: usize,
    /// Within-step or across-epoch hint escalation.
    pub escalation_mode: EscalationMode,
    /// Base seed for every derived random stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: full-scale ratios at laptop cost.
    fn default() -> Self {
        Self {
            g: 8,
            batch_size: 16,
            grad_accum_steps: 1,
            lr0: 0.015,
            warmup_frac: 0.1,
            total_steps: 500,
            temperature: 1.0,
            max_tokens: 256,
            eps_norm: 1e-4,
            eps_clip: 0.2,
            beta_kl: 0.0,
            w_acc: 2.0,
            w_fmt: 1.0,
            omega_schedule: vec![0.25, 0.5, 0.75],
            cold_start_n: 20,
            escalation_mode: EscalationMode::WithinStep,
            seed: 42,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl TrainConfig {
    /// Check every field invariant.
    pub fn validate(&self) -> Result<()> {
        if self.g < 2 {
            return Err(invalid("G", "group size must be >= 2"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        if self.grad_accum_steps == 0 {
            return Err(invalid("grad_accum_steps", "must be >= 1"));
        }
        if self.batch_size % self.grad_accum_steps != 0 {
            return Err(invalid(
                "grad_accum_steps",
                format!(
                    "must divide batch_size evenly ({} % {} != 0)",
                    self.batch_size, self.grad_accum_steps
                ),
            ));
        }
        if !self.lr0.is_finite() || self.lr0 < 0.0 {
            return Err(invalid("lr0", "must be finite and >= 0"));
        }
        if !self.warmup_frac.is_finite() || !(0.0..1.0).contains(&self.warmup_frac) {
            return Err(invalid("warmup_frac", "must lie in [0, 1)"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(invalid("temperature", "must be > 0"));
        }
        if !self.eps_norm.is_finite() || self.eps_norm <= 0.0 {
            return Err(invalid("eps_norm", "must be > 0"));
        }
        if !self.eps_clip.is_finite() || self.eps_clip <= 0.0 || self.eps_clip >= 1.0 {
            return Err(invalid("eps_clip", "must lie in (0, 1)"));
        }
        if !self.beta_kl.is_finite() || self.beta_kl < 0.0 {
            return Err(invalid("beta_kl", "must be finite and >= 0"));
        }
        if !self.w_acc.is_finite() || self.w_acc < 0.0 {
            return Err(invalid("w_acc", "must be finite and >= 0"));
        }
        if !self.w_fmt.is_finite() || self.w_fmt < 0.0 {
            return Err(invalid("w_fmt", "must be finite and >= 0"));
        }
        let mut prev = 0.0f64;
        for (i, &w) in self.omega_schedule.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 || w > 1.0 {
                return Err(invalid(
                    "omega_schedule",
                    format!("entry {i} = {w} outside (0, 1]"),
                ));
            }
            if i > 0 && w <= prev {
                return Err(invalid("omega_schedule", "schedule not increasing"));
            }
            prev = w;
        }
        Ok(())
    }

    /// Parse a flat key-value config file, starting from defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_flat(&text)
    }

    /// Parse config text in the flat key-value format.
    pub fn from_str_flat(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid(
                    "<file>",
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(invalid(key, "duplicate key"));
            }
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| invalid(key, format!("cannot parse `{value}`")))
        }
        match key {
            "G" => self.g = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "grad_accum_steps" => self.grad_accum_steps = num(key, value)?,
            "lr0" => self.lr0 = num(key, value)?,
            "warmup_frac" => self.warmup_frac = num(key, value)?,
            "total_steps" => self.total_steps = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "max_tokens" => self.max_tokens = num(key, value)?,
            "eps_norm" => self.eps_norm = num(key, value)?,
            "eps_clip" => self.eps_clip = num(key, value)?,
            "beta_kl" => self.beta_kl = num(key, value)?,
            "w_acc" => self.w_acc = num(key, value)?,
            "w_fmt" => self.w_fmt = num(key, value)?,
            "cold_start_N" => self.cold_start_n = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "omega_schedule" => {
                self.omega_schedule = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| num::<f64>(key, s.trim()))
                        .collect::<Result<_>>()?
                };
            }
            "escalation_mode" => {
                self.escalation_mode = EscalationMode::parse(value).ok_or_else(|| {
                    invalid(key, "expected `within_step` or `across_epochs`")
                })?;
            }
            _ => return Err(invalid(key, "unknown config key")),
        }
        Ok(())
    }

    /// Steps covered by the linear warmup ramp.
    pub fn warmup_steps(&self) -> usize {
        (self.warmup_frac * self.total_steps as f64).round() as usize
    }

    /// True once hint refinement is enabled at all.
    pub fn hints_enabled(&self) -> bool {
        !self.omega_schedule.is_empty()
    }
}
