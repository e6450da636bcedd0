//! Cosine learning-rate schedule with linear warmup.
//!
//! - warmup spans `round(warmup_frac * total_steps)` steps: lr climbs
//!   linearly from 0 at step 0 to exactly `lr0` at the warmup boundary;
//! - after warmup, lr follows `lr0 * 0.5 * (1 + cos(pi * progress))`
//!   where progress runs linearly from 0 just past warmup to 1 at the
//!   final step, decaying to zero;
//! - the curve is nondecreasing through warmup and nonincreasing after.

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Learning rate at `step` in `0..=total_steps`.
pub fn cosine_lr(step: usize, cfg: &TrainConfig) -> Result<f64> {
    let total = cfg.total_steps;
    if step > total {
        return Err(Error::StepOutOfRange { step, total });
    }
    if total == 0 {
        return Ok(0.0);
    }
    let warmup = cfg.warmup_steps();
    if warmup > 0 && step <= warmup {
        return Ok(cfg.lr0 * step as f64 / warmup as f64);
    }
    let span = (total - warmup).max(1);
    let progress = (step - warmup) as f64 / span as f64;
    Ok(cfg.lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}
