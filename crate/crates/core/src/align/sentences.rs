use serde::{Deserialize, Serialize};

use super::edit::{align_by, edit_distance, EditOp};

/// Character-level Levenshtein ratio on lower-cased input:
/// `1 - dist(a, b) / max(|a|, |b|)`. Two empty strings are identical.
pub fn similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&a, &b) as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub reference: usize,
    pub hypothesis: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentencePairing {
    pub pairs: Vec<SentencePair>,
    pub unpaired_ref: Vec<usize>,
    pub unpaired_hyp: Vec<usize>,
}

impl SentencePairing {
    /// Total alignment cost: `1 - similarity` per pair plus one per
    /// unpaired sentence.
    pub fn cost(&self) -> f64 {
        self.pairs.iter().map(|p| 1.0 - p.similarity).sum::<f64>() + (self.unpaired_ref.len() + self.unpaired_hyp.len()) as f64
    }
}

/// Sequence alignment of sentences where pairing `r` with `h` costs
/// `1 - similarity(r, h)` and leaving a sentence unpaired costs 1.
pub fn align_sentences<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> SentencePairing {
    let sims: Vec<Vec<f64>> = reference
        .iter()
        .map(|r| hypothesis.iter().map(|h| similarity(r.as_ref(), h.as_ref())).collect())
        .collect();
    let diag = |i: usize, j: usize| {
        let s = sims[i][j];
        Some((1.0 - s, s == 1.0))
    };
    let (_, ops) = align_by(reference.len(), hypothesis.len(), &diag, &|_| 1.0, &|_| 1.0, 0.0f64);
    let mut out = SentencePairing::default();
    for op in ops {
        match op {
            EditOp::Match { src, tgt } | EditOp::Substitute { src, tgt } => {
                out.pairs.push(SentencePair { reference: src, hypothesis: tgt, similarity: sims[src][tgt] })
            }
            EditOp::Delete { src } => out.unpaired_ref.push(src),
            EditOp::Insert { tgt } => out.unpaired_hyp.push(tgt),
        }
    }
    out
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | '…')
}

/// Splits running text into sentences at `.`, `?`, `!` or `…` (runs of
/// them count once) when followed by whitespace, an uppercase letter, or
/// the end of the text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if is_terminator(chars[i]) {
            let mut end = i + 1;
            while end < chars.len() && is_terminator(chars[end]) {
                end += 1;
            }
            let boundary = match chars.get(end) {
                None => true,
                Some(c) => c.is_whitespace() || c.is_uppercase(),
            };
            if boundary {
                let s: String = chars[start..end].iter().collect::<String>().trim().to_string();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
            i = end;
        } else {
            i += 1;
        }
    }
    let tail: String = chars[start..].iter().collect::<String>().trim().to_string();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}
