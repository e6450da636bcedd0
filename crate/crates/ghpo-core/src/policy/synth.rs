//! Synthetic arithmetic problem generator.
//!
//! Produces self-consistent integer word problems with multi-step
//! solution traces and a per-problem scalar difficulty:
//!
//! - templates rotate through two- and three-operand addition,
//!   subtraction, and multiplication;
//! - operand magnitude grows with the difficulty scalar, so harder
//!   problems have longer traces and bigger answers;
//! - difficulties are drawn from two disjoint bands (easy and hard)
//!   with a configurable hard fraction, shuffled so batches mix both.
//!
//! Every generated trace, wrapped in the think/answer template, scores
//! accuracy 1 under the verifier: the trace ends with the answer.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{stream, Domain};
use crate::types::Problem;

/// Half-open difficulty band [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "band must be non-empty");
        Self { lo, hi }
    }
}

/// Generate `n` problems with the given difficulty mix. Returns the
/// problems and the id -> difficulty table the simulation consumes.
pub fn synth_dataset(
    n: usize,
    hard_frac: f64,
    easy: Band,
    hard: Band,
    seed: u64,
) -> (Vec<Problem>, HashMap<String, f64>) {
    assert!((0.0..=1.0).contains(&hard_frac), "hard_frac in [0, 1]");
    let mut rng = stream(seed, Domain::Dataset, 0, 0, 0);
    let n_hard = (n as f64 * hard_frac).round() as usize;
    let mut difficulties: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..n_hard.min(n) {
        difficulties.push(rng.gen_range(hard.lo..hard.hi));
    }
    while difficulties.len() < n {
        difficulties.push(rng.gen_range(easy.lo..easy.hi));
    }
    difficulties.shuffle(&mut rng);

    let mut problems = Vec::with_capacity(n);
    let mut table = HashMap::with_capacity(n);
    for (i, d) in difficulties.into_iter().enumerate() {
        let id = format!("synth-{i:04}");
        let problem = make_problem(&id, d, &mut rng);
        table.insert(id, d);
        problems.push(problem);
    }
    (problems, table)
}

/// Operand ceiling grows with difficulty so harder problems read harder.
fn operand_ceiling(d: f64) -> i64 {
    10 + (d.max(0.0) * 25.0).round() as i64
}

fn make_problem(id: &str, d: f64, rng: &mut impl Rng) -> Problem {
    let hi = operand_ceiling(d);
    let a = rng.gen_range(2..=hi);
    let b = rng.gen_range(2..=hi);
    let c = rng.gen_range(2..=hi);
    let template = rng.gen_range(0..4u8);
    let (statement, trace, answer) = match template {
        0 => (
            format!("Compute {a} + {b}."),
            format!("{a}+{b}={}", a + b),
            a + b,
        ),
        1 => {
            let (x, y) = if a >= b { (a, b) } else { (b, a) };
            (
                format!("Compute {x} - {y}."),
                format!("{x}-{y}={}", x - y),
                x - y,
            )
        }
        2 => (
            format!("Compute {a} * {b}."),
            format!("{a}*{b}={}", a * b),
            a * b,
        ),
        _ => {
            let s1 = a + b;
            (
                format!("Compute {a} + {b} + {c}."),
                format!("{a}+{b}={s1}\n{s1}+{c}={}", s1 + c),
                s1 + c,
            )
        }
    };
    Problem {
        id: id.to_string(),
        statement,
        solution_trace: trace,
        answer: answer.to_string(),
        difficulty_level: Some(d.round() as i64),
    }
}
