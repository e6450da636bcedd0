//! Toy vocabulary of atomic symbols for the tabular softmax policy.
//!
//! Tokens are digits, arithmetic punctuation, the template tag markers,
//! the box markers, end-of-sequence, and an unknown marker. Encoding is
//! greedy longest-match; characters outside the vocabulary map to the
//! unknown token so arbitrary prompt text still conditions the policy.

/// Ordered token inventory. Ids are indices into [`Vocab::tokens`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    eos: usize,
    unk: usize,
}

impl Vocab {
    /// The standard inventory: 10 digits, 10 punctuation marks, 4 tag
    /// markers, 2 box markers, end-of-sequence, unknown.
    pub fn standard() -> Self {
        let mut tokens: Vec<String> = Vec::new();
        for d in 0..10u32 {
            tokens.push(d.to_string());
        }
        for p in ["+", "-", "*", "/", "=", ".", "(", ")", " ", "\n"] {
            tokens.push(p.to_string());
        }
        for tag in ["<think>", "</think>", "<answer>", "</answer>"] {
            tokens.push(tag.to_string());
        }
        tokens.push("\\boxed{".to_string());
        tokens.push("}".to_string());
        tokens.push("<eos>".to_string());
        tokens.push("<unk>".to_string());
        let eos = tokens.len() - 2;
        let unk = tokens.len() - 1;
        debug_assert_eq!(
            tokens.len(),
            tokens
                .iter()
                .collect::<std::collections::HashSet<_>>()
                .len()
        );
        Self { tokens, eos, unk }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos_id(&self) -> usize {
        self.eos
    }

    pub fn unk_id(&self) -> usize {
        self.unk
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    /// Greedy longest-match encoding; unmatched characters become one
    /// unknown token each.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        let mut rest = text;
        'outer: while !rest.is_empty() {
            let mut best: Option<(usize, usize)> = None;
            for (id, tok) in self.tokens.iter().enumerate() {
                if id == self.eos || id == self.unk {
                    continue;
                }
                if rest.starts_with(tok.as_str())
                    && best.map_or(true, |(_, len)| tok.len() > len)
                {
                    best = Some((id, tok.len()));
                }
            }
            if let Some((id, len)) = best {
                ids.push(id);
                rest = &rest[len..];
                continue 'outer;
            }
            ids.push(self.unk);
            let mut chars = rest.chars();
            chars.next();
            rest = chars.as_str();
        }
        ids
    }

    /// Concatenate tokens back to text; eos and unknown render empty.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == self.eos || id == self.unk {
                continue;
            }
            if let Some(tok) = self.tokens.get(id) {
                out.push_str(tok);
            }
        }
        out
    }
}
