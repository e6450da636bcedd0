//! Error type shared by every module in the crate.
//!
//! One enum keeps the public API surface small: callers match on the
//! variant when they care, or bubble the value up through [`Result`].

use thiserror::Error;

/// Crate-wide error enum.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field violated its documented bound.
    #[error("invalid config: field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A dataset line failed to parse or violated a record invariant.
    #[error("dataset error at line {line}: {reason}")]
    Dataset { line: usize, reason: String },

    /// Advantage estimation needs at least two rollouts per group.
    #[error("group too small: got {got}, need at least 2")]
    GroupTooSmall { got: usize },

    /// Per-token sequences that must align had different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Difficulty detection received no rewards to inspect.
    #[error("empty reward list")]
    EmptyRewards,

    /// A hint was requested for a problem with an empty solution trace.
    #[error("problem `{id}` has no solution trace to extract a hint from")]
    NoSolutionTrace { id: String },

    /// A hint stage was advanced past the end of the schedule.
    #[error("hint schedule exhausted at stage {stage}")]
    ScheduleExhausted { stage: usize },

    /// A token outside the vocabulary reached the policy.
    #[error("unknown token id {id} (vocab size {vocab})")]
    UnknownToken { id: usize, vocab: usize },

    /// The learning-rate schedule was queried outside [0, total_steps].
    #[error("step {step} outside schedule range 0..={total}")]
    StepOutOfRange { step: usize, total: usize },

    /// Normalization received an empty answer string.
    #[error("empty answer text")]
    EmptyAnswer,

    /// A checkpoint file had the wrong version or shape.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A metrics CSV row failed to parse.
    #[error("metrics error at row {row}: {reason}")]
    Metrics { row: usize, reason: String },

    /// Not enough seeds were supplied for a statistical comparison.
    #[error("need \u{2265} 2 seeds, got {got}")]
    NeedMoreSeeds { got: usize },

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
