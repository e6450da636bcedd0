//! JSON-lines dataset loading and saving.
//!
//! One problem record per line, UTF-8, fields `id` / `statement` /
//! `solution` / `answer` plus optional `difficulty_level`. Errors carry
//! 1-based line numbers; duplicate ids are rejected; record order is
//! preserved.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Problem;

/// Load problems from a JSON-lines file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Problem>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

/// Parse JSON-lines dataset text. Blank lines are ignored.
pub fn parse_dataset(text: &str) -> Result<Vec<Problem>> {
    let mut problems = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(raw).map_err(|e| Error::Dataset {
            line,
            reason: e.to_string(),
        })?;
        problem.check().map_err(|reason| Error::Dataset { line, reason })?;
        if !seen.insert(problem.id.clone()) {
            return Err(Error::Dataset {
                line,
                reason: format!("duplicate id `{}`", problem.id),
            });
        }
        problems.push(problem);
    }
    Ok(problems)
}

/// Serialize problems back to JSON-lines text.
pub fn render_dataset(problems: &[Problem]) -> Result<String> {
    let mut out = String::new();
    for p in problems {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

/// Write problems to a JSON-lines file.
pub fn save_dataset(path: impl AsRef<Path>, problems: &[Problem]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_dataset(problems)?.as_bytes())?;
    Ok(())
}
