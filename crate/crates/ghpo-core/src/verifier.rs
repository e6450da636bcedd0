//! Rule-based verifiable reward: answer extraction, normalization,
//! equivalence, and format compliance.
//!
//! - `extract_answer` cascade: innermost `\boxed{...}` inside the answer
//!   block, else the full answer-block content, else the last
//!   `\boxed{...}` anywhere, else absent. Brace matching is balanced.
//! - `normalize` canonicalizes to a reduced rational when the text is a
//!   `\frac`/`\dfrac`, a plain `a/b`, a signed integer, or a decimal
//!   (d fractional digits become a denominator of 10^d); integers too
//!   large for exact arithmetic fall back to the decimal kind; anything
//!   else becomes whitespace-collapsed symbolic text.
//! - `check_format` accepts both template variants: a block ends at the
//!   earliest of its closing tag or a repeat of its opening tag, so
//!   `<think>r<think>` and `<think>r</think>` both count.
//! - Symbolic equivalence is string-level only; `x(x+1)` vs `x^2+x` is a
//!   documented non-goal of the rule-based verifier.

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::types::{Problem, RewardBreakdown};

/// Template tags the format checker looks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub think_open: String,
    pub think_close: String,
    pub answer_open: String,
    pub answer_close: String,
    /// Require the think block to precede the answer block.
    pub require_order: bool,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            think_open: "<think>".into(),
            think_close: "</think>".into(),
            answer_open: "<answer>".into(),
            answer_close: "</answer>".into(),
            require_order: true,
        }
    }
}

/// Canonical form an answer string normalizes to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CanonicalAnswer {
    /// Reduced rational: gcd(|num|, den) = 1, den > 0.
    Rational { num: i128, den: i128 },
    /// Numeric value too large for exact rational arithmetic.
    Decimal { value: f64 },
    /// Whitespace-collapsed, wrapper-free text.
    SymbolicText { text: String },
}

impl CanonicalAnswer {
    /// Print the canonical form (used by the idempotence property).
    pub fn render(&self) -> String {
        match self {
            Self::Rational { num, den } if *den == 1 => num.to_string(),
            Self::Rational { num, den } => format!("{num}/{den}"),
            Self::Decimal { value } => format!("{value}"),
            Self::SymbolicText { text } => text.clone(),
        }
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

fn make_rational(mut num: i128, mut den: i128) -> Option<CanonicalAnswer> {
    if den == 0 {
        return None;
    }
    if den < 0 {
        num = num.checked_neg()?;
        den = den.checked_neg()?;
    }
    let g = gcd(num, den).max(1);
    Some(CanonicalAnswer::Rational {
        num: num / g,
        den: den / g,
    })
}

/// Find `pat` in `text` at or after `from`.
fn find_from(text: &str, pat: &str, from: usize) -> Option<usize> {
    text.get(from..)?.find(pat).map(|i| i + from)
}

/// Content span of a block opened by `open` at/after `from`: the block
/// ends at the earliest of `close` or a repeated `open` tag.
/// Returns (content_start, content_end, end_of_block).
fn block_span(text: &str, open: &str, close: &str, from: usize) -> Option<(usize, usize, usize)> {
    let start = find_from(text, open, from)?;
    let content_start = start + open.len();
    let close_pos = find_from(text, close, content_start);
    let reopen_pos = find_from(text, open, content_start);
    let (content_end, delim_len) = match (close_pos, reopen_pos) {
        (Some(c), Some(r)) if r < c => (r, open.len()),
        (Some(c), _) => (c, close.len()),
        (None, Some(r)) => (r, open.len()),
        (None, None) => return None,
    };
    Some((content_start, content_end, content_end + delim_len))
}

/// Balanced-brace content spans of every `\boxed{...}` occurrence, in
/// textual order. Unbalanced candidates are skipped.
fn boxed_spans(text: &str) -> Vec<(usize, usize)> {
    const MARK: &str = "\\boxed{";
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(pos) = find_from(text, MARK, from) {
        let content_start = pos + MARK.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, ch) in text[content_start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(content_start + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(e) = end {
            spans.push((content_start, e));
        }
        from = content_start;
    }
    spans
}

/// Last boxed span's content within `text`, descending into nested boxes.
fn last_boxed_innermost(text: &str) -> Option<String> {
    let spans = boxed_spans(text);
    let &(s, e) = spans.last()?;
    let content = &text[s..e];
    match last_boxed_innermost(content) {
        Some(inner) => Some(inner),
        None => Some(content.trim().to_string()),
    }
}

/// Extract the candidate answer from a response, or absent.
pub fn extract_answer(response_text: &str, spec: &FormatSpec) -> Option<String> {
    if let Some((s, e, _)) = block_span(response_text, &spec.answer_open, &spec.answer_close, 0) {
        let block = &response_text[s..e];
        if let Some(inner) = last_boxed_innermost(block) {
            return Some(inner);
        }
        let trimmed = block.trim();
        if !trimmed.is_empty() {
            return Some(trimmed.to_string());
        }
        return None;
    }
    last_boxed_innermost(response_text)
}

fn parse_int(s: &str) -> Option<i128> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse::<i128>().ok()
}

/// Parse a plain decimal like `-3.25`, `.5`, or `7.`; exact rational when
/// it fits i128, decimal kind otherwise.
fn parse_decimal(s: &str) -> Option<CanonicalAnswer> {
    let t = s.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
        || (int_part.is_empty() && frac_part.is_empty())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let exact = digits.parse::<i128>().ok().and_then(|mag| {
        let den = 10i128.checked_pow(frac_part.len() as u32)?;
        make_rational(sign * mag, den)
    });
    exact.or_else(|| t.parse::<f64>().ok().map(|value| CanonicalAnswer::Decimal { value }))
}

/// Parse `\frac{a}{b}` / `\dfrac{a}{b}` with integer parts.
fn parse_frac(s: &str) -> Option<CanonicalAnswer> {
    let rest = s
        .strip_prefix("\\dfrac")
        .or_else(|| s.strip_prefix("\\frac"))?
        .trim_start();
    let (a, rest) = brace_group(rest)?;
    let (b, rest) = brace_group(rest.trim_start())?;
    if !rest.trim().is_empty() {
        return None;
    }
    make_rational(parse_int(&a)?, parse_int(&b)?)
}

/// Split a leading balanced `{...}` group off `s`.
fn brace_group(s: &str) -> Option<(String, &str)> {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, '{')) => {}
        _ => return None,
    }
    let mut depth = 1usize;
    for (i, ch) in chars {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((s[1..i].to_string(), &s[i + 1..]));
                }
            }
            _ => {}
        }
    }
    None
}

/// Strip outer braces when they wrap the whole string.
fn strip_outer_braces(s: &str) -> &str {
    let mut cur = s.trim();
    loop {
        if !(cur.starts_with('{') && cur.ends_with('}') && cur.len() >= 2) {
            return cur;
        }
        let inner = &cur[1..cur.len() - 1];
        let mut depth = 0i64;
        let mut wraps = true;
        for ch in inner.chars() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth < 0 {
                        wraps = false;
                        break;
                    }
                }
                _ => {}
            }
        }
        if !wraps || depth != 0 {
            return cur;
        }
        cur = inner.trim();
    }
}

/// Canonicalize a raw answer string.
pub fn normalize(raw: &str) -> Result<CanonicalAnswer> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyAnswer);
    }
    let cleaned = raw.replace('$', "").replace("\\left", "").replace("\\right", "");
    let stripped = strip_outer_braces(&cleaned);
    if let Some(r) = parse_frac(stripped) {
        return Ok(r);
    }
    if let Some((a, b)) = stripped.split_once('/') {
        if let (Some(num), Some(den)) = (parse_int(a), parse_int(b)) {
            if let Some(r) = make_rational(num, den) {
                return Ok(r);
            }
        }
    }
    if let Some(n) = parse_int(stripped) {
        return Ok(CanonicalAnswer::Rational { num: n, den: 1 });
    }
    if let Some(r) = parse_decimal(stripped) {
        return Ok(r);
    }
    let text = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    Ok(CanonicalAnswer::SymbolicText { text })
}

/// Equivalence test between a predicted answer and the ground truth.
pub fn answers_equal(pred: &str, gold: &str) -> bool {
    let (Ok(p), Ok(g)) = (normalize(pred), normalize(gold)) else {
        return false;
    };
    match (p, g) {
        (
            CanonicalAnswer::Rational { num: a, den: b },
            CanonicalAnswer::Rational { num: c, den: d },
        ) => a == c && b == d,
        (CanonicalAnswer::Decimal { value: a }, CanonicalAnswer::Decimal { value: b }) => a == b,
        (
            CanonicalAnswer::SymbolicText { text: a },
            CanonicalAnswer::SymbolicText { text: b },
        ) => a == b,
        _ => false,
    }
}

/// Format compliance: think block then answer block, both non-empty.
pub fn check_format(response_text: &str, spec: &FormatSpec) -> u8 {
    let think = block_span(response_text, &spec.think_open, &spec.think_close, 0);
    let answer_from = match (&think, spec.require_order) {
        (Some((_, _, end)), true) => *end,
        _ => 0,
    };
    let answer = block_span(response_text, &spec.answer_open, &spec.answer_close, answer_from);
    match (think, answer) {
        (Some((ts, te, _)), Some((as_, ae, _))) => {
            let think_ok = !response_text[ts..te].trim().is_empty();
            let answer_ok = !response_text[as_..ae].trim().is_empty();
            (think_ok && answer_ok) as u8
        }
        _ => 0,
    }
}

/// Score one response against a problem under the configured weights.
pub fn score(response_text: &str, problem: &Problem, cfg: &TrainConfig) -> RewardBreakdown {
    let spec = FormatSpec::default();
    let accuracy = extract_answer(response_text, &spec)
        .map(|pred| answers_equal(&pred, &problem.answer) as u8)
        .unwrap_or(0);
    let format = check_format(response_text, &spec);
    RewardBreakdown::new(accuracy, format, cfg.w_acc, cfg.w_fmt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(answer: &str) -> Problem {
        Problem {
            id: "p".into(),
            statement: "q".into(),
            solution_trace: "s".into(),
            answer: answer.into(),
            difficulty_level: None,
        }
    }

    #[test]
    fn extracts_boxed_inside_repeated_tag_answer_block() {
        let spec = FormatSpec::default();
        let text = "<think>t<think><answer>\\boxed{\\frac{1}{3600}}<answer>";
        assert_eq!(extract_answer(text, &spec).unwrap(), "\\frac{1}{3600}");
    }

    #[test]
    fn extraction_absent_without_markers() {
        assert_eq!(extract_answer("no markers at all", &FormatSpec::default()), None);
    }

    #[test]
    fn last_box_wins_without_answer_block() {
        let spec = FormatSpec::default();
        let text = "text \\boxed{210} more \\boxed{\\frac{1}{210}}";
        assert_eq!(extract_answer(text, &spec).unwrap(), "\\frac{1}{210}");
    }

    #[test]
    fn answer_block_without_box_returns_block_content() {
        let spec = FormatSpec::default();
        let text = "<answer> 42 </answer>";
        assert_eq!(extract_answer(text, &spec).unwrap(), "42");
    }

    #[test]
    fn nested_boxes_descend_to_innermost() {
        let spec = FormatSpec::default();
        let text = "<answer>\\boxed{\\boxed{5}}</answer>";
        assert_eq!(extract_answer(text, &spec).unwrap(), "5");
        assert_eq!(extract_answer("\\boxed{a \\boxed{b}}", &spec).unwrap(), "b");
    }

    #[test]
    fn unbalanced_box_is_skipped() {
        let spec = FormatSpec::default();
        assert_eq!(extract_answer("\\boxed{1", &spec), None);
        // A later balanced box still wins.
        assert_eq!(extract_answer("\\boxed{1 \\boxed{2}", &spec).unwrap(), "2");
    }

    #[test]
    fn normalize_frac_to_reduced_rational() {
        assert_eq!(
            normalize("\\frac{1}{3600}").unwrap(),
            CanonicalAnswer::Rational { num: 1, den: 3600 }
        );
        assert_eq!(
            normalize("\\dfrac{2}{4}").unwrap(),
            CanonicalAnswer::Rational { num: 1, den: 2 }
        );
        assert_eq!(
            normalize("\\frac{-3}{-6}").unwrap(),
            CanonicalAnswer::Rational { num: 1, den: 2 }
        );
    }

    #[test]
    fn normalize_decimal_to_reduced_rational() {
        // 0.5 = 5/10 reduced to 1/2.
        assert_eq!(normalize("0.5").unwrap(), CanonicalAnswer::Rational { num: 1, den: 2 });
        assert_eq!(
            normalize("-3.25").unwrap(),
            CanonicalAnswer::Rational { num: -13, den: 4 }
        );
        assert_eq!(normalize(".5").unwrap(), CanonicalAnswer::Rational { num: 1, den: 2 });
    }

    #[test]
    fn normalize_strips_wrappers() {
        assert_eq!(normalize("$\\frac{1}{2}$").unwrap(), normalize("1/2").unwrap());
        assert_eq!(
            normalize("\\left( 3 \\right)").unwrap(),
            CanonicalAnswer::SymbolicText { text: "( 3 )".into() }
        );
        assert_eq!(normalize("{{7}}").unwrap(), CanonicalAnswer::Rational { num: 7, den: 1 });
        // Braces that do not wrap the whole string stay.
        assert_eq!(
            normalize("{1}{2}").unwrap(),
            CanonicalAnswer::SymbolicText { text: "{1}{2}".into() }
        );
    }

    #[test]
    fn normalize_symbolic_collapses_whitespace() {
        assert_eq!(
            normalize("x  +\t1").unwrap(),
            CanonicalAnswer::SymbolicText { text: "x + 1".into() }
        );
        assert_eq!(
            normalize("x+1").unwrap(),
            CanonicalAnswer::SymbolicText { text: "x+1".into() }
        );
    }

    #[test]
    fn normalize_empty_is_error() {
        assert!(normalize("").is_err());
        assert!(normalize("   ").is_err());
    }

    #[test]
    fn normalize_idempotent_through_render() {
        for raw in ["\\frac{2}{4}", "0.5", "-17", "x + 1", "{{3/9}}", "$0.125$"] {
            let once = normalize(raw).unwrap();
            let twice = normalize(&once.render()).unwrap();
            assert_eq!(once, twice, "not idempotent for {raw}");
        }
    }

    #[test]
    fn huge_decimal_falls_back_to_decimal_kind() {
        let raw = "0.0000000000000000000000000000000000000001";
        match normalize(raw).unwrap() {
            CanonicalAnswer::Decimal { value } => assert!((value - 1e-40).abs() < 1e-50),
            other => panic!("expected decimal fallback, got {other:?}"),
        }
    }

    #[test]
    fn appendix_pair_equivalence() {
        assert!(answers_equal("\\frac{1}{3600}", "1/3600"));
        assert!(!answers_equal("1/210", "1/3600"));
    }

    #[test]
    fn equality_reflexive_and_symmetric() {
        let samples = ["5", "1/3", "0.25", "x+1", "\\frac{7}{2}"];
        for a in samples {
            assert!(answers_equal(a, a), "not reflexive on {a}");
            for b in samples {
                assert_eq!(answers_equal(a, b), answers_equal(b, a));
            }
        }
    }

    #[test]
    fn kind_mismatch_is_false() {
        assert!(!answers_equal("x+1", "5"));
        assert!(!answers_equal("", "5"));
    }

    #[test]
    fn format_accepts_both_tag_variants() {
        let spec = FormatSpec::default();
        assert_eq!(check_format("<think>r<think><answer>a<answer>", &spec), 1);
        assert_eq!(check_format("<think>r</think><answer>a</answer>", &spec), 1);
        // Mixed variants resolve too.
        assert_eq!(check_format("<think>r</think><answer>a<answer>", &spec), 1);
    }

    #[test]
    fn format_rejects_order_violation_and_empties() {
        let spec = FormatSpec::default();
        assert_eq!(check_format("<answer>a<answer><think>r<think>", &spec), 0);
        assert_eq!(check_format("", &spec), 0);
        assert_eq!(check_format("<think><think><answer>a<answer>", &spec), 0);
        assert_eq!(check_format("<think>r<think><answer> <answer>", &spec), 0);
        assert_eq!(check_format("<think>r<think>", &spec), 0);
    }

    #[test]
    fn format_order_relaxed_when_configured() {
        let spec = FormatSpec {
            require_order: false,
            ..FormatSpec::default()
        };
        assert_eq!(check_format("<answer>a<answer><think>r<think>", &spec), 1);
    }

    #[test]
    fn score_takes_the_four_weighted_values() {
        let cfg = TrainConfig::default();
        let p = problem("5");
        let both = "<think>work<think><answer>\\boxed{5}<answer>";
        let fmt_only = "<think>work<think><answer>\\boxed{6}<answer>";
        let acc_only = "\\boxed{5}";
        let neither = "gibberish";
        assert_eq!(score(both, &p, &cfg).combined, 3.0);
        assert_eq!(score(fmt_only, &p, &cfg).combined, 1.0);
        assert_eq!(score(acc_only, &p, &cfg).combined, 2.0);
        assert_eq!(score(neither, &p, &cfg).combined, 0.0);
    }

    #[test]
    fn score_handles_absent_extraction_as_zero_accuracy() {
        let cfg = TrainConfig::default();
        let r = score("<think>r<think><answer> <answer>", &problem("5"), &cfg);
        assert_eq!(r.accuracy, 0);
    }
}
