//! Subtitle edit rate.
//!
//! Each cue is tokenized into its words, a line-break token after every
//! non-final line and a block-break token at its end. Every token keeps the
//! time span of its cue. A reference and a hypothesis token may be matched or
//! substituted only when their cues overlap in time, and only with a token of
//! the same family (word with word, break with break). Insertions and
//! deletions are always allowed. Shifts move a block of hypothesis words,
//! chosen greedily: at each step the shift yielding the lowest edit distance
//! is applied while it lowers the distance at all.
//!
//! Tokens of cues that never overlap (directly or through a chain of
//! overlapping cues) cannot interact, so both files are cut into independent
//! time chunks first. Within a chunk the time-constrained edit distance is
//! computed as `|R| + |H| − W`, where `W` is the largest total weight of a
//! crossing-free matching over the allowed token pairs (2 for a match, 1 for
//! a substitution). The allowed pairs are sparse in practice, so this runs in
//! `O(P log |H|)` for `P` pairs instead of a dense `|R|·|H|` table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::align::{normalize, EditOp, NormSpec};
use crate::model::{SubtitleFile, TimeCode};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubToken {
    Word(String),
    /// End of a line inside a cue.
    LineBreak,
    /// End of a cue.
    BlockBreak,
}

impl SubToken {
    pub fn is_word(&self) -> bool {
        matches!(self, SubToken::Word(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedToken {
    pub token: SubToken,
    pub start: TimeCode,
    pub end: TimeCode,
}

impl TimedToken {
    pub fn overlaps(&self, other: &TimedToken) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Whether the two tokens may be aligned on the diagonal, and if so
    /// whether that is a match.
    pub fn pairing(&self, other: &TimedToken) -> Option<bool> {
        if !self.overlaps(other) || self.token.is_word() != other.token.is_word() {
            return None;
        }
        Some(self.token == other.token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuberConfig {
    /// Token normalization; `None` compares whitespace tokens verbatim
    /// (case- and punctuation-sensitive).
    pub norm: Option<NormSpec>,
    pub max_shift_len: usize,
    pub max_shift_iterations: usize,
    /// Chunks with at most this many hypothesis tokens try every shift
    /// destination; larger chunks only try positions next to where the
    /// matching reference span is currently aligned.
    pub exhaustive_destination_limit: usize,
    /// Cap on candidate shifts evaluated per iteration.
    pub max_candidates: usize,
}

impl Default for SuberConfig {
    fn default() -> Self {
        SuberConfig {
            norm: None,
            max_shift_len: 10,
            max_shift_iterations: 1000,
            exhaustive_destination_limit: 60,
            max_candidates: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuberScore {
    pub word_edits: usize,
    pub break_edits: usize,
    pub shifts: usize,
    /// Reference words plus reference break tokens.
    pub denom: usize,
    pub score: f64,
}

impl SuberScore {
    pub fn total_edits(&self) -> usize {
        self.word_edits + self.break_edits + self.shifts
    }
}

/// Word and break tokens of a subtitle file, in order.
pub fn subtitle_tokens(file: &SubtitleFile, norm: Option<&NormSpec>) -> Vec<TimedToken> {
    let mut out = Vec::new();
    for cue in file.cues() {
        let (start, end) = (cue.start(), cue.end());
        let lines = cue.lines();
        for (li, line) in lines.iter().enumerate() {
            let words = match norm {
                Some(spec) => normalize(line, spec),
                None => line.split_whitespace().map(str::to_string).collect(),
            };
            out.extend(words.into_iter().map(|w| TimedToken { token: SubToken::Word(w), start, end }));
            if li + 1 < lines.len() {
                out.push(TimedToken { token: SubToken::LineBreak, start, end });
            }
        }
        out.push(TimedToken { token: SubToken::BlockBreak, start, end });
    }
    out
}

pub fn suber(reference: &SubtitleFile, hyp: &SubtitleFile) -> Result<SuberScore, MetricsError> {
    suber_with(reference, hyp, &SuberConfig::default())
}

pub fn suber_with(reference: &SubtitleFile, hyp: &SubtitleFile, cfg: &SuberConfig) -> Result<SuberScore, MetricsError> {
    let r = subtitle_tokens(reference, cfg.norm.as_ref());
    let h = subtitle_tokens(hyp, cfg.norm.as_ref());
    suber_tokens(&r, &h, cfg)
}

/// SubER over pre-tokenized input. Both token lists must be grouped by cue
/// in cue start order, as [`subtitle_tokens`] produces them.
pub fn suber_tokens(r: &[TimedToken], h: &[TimedToken], cfg: &SuberConfig) -> Result<SuberScore, MetricsError> {
    if r.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let mut word_edits = 0;
    let mut break_edits = 0;
    let mut shifts = 0;
    for (rc, hc) in time_chunks(r, h) {
        let out = ChunkAligner::new(&r[rc], &h[hc], cfg).run();
        word_edits += out.word_edits;
        break_edits += out.break_edits;
        shifts += out.shifts;
    }
    let denom = r.len();
    Ok(SuberScore {
        word_edits,
        break_edits,
        shifts,
        denom,
        score: (word_edits + break_edits + shifts) as f64 / denom as f64,
    })
}

type Range = std::ops::Range<usize>;

/// Splits both token lists at instants no cue of either side spans.
fn time_chunks(r: &[TimedToken], h: &[TimedToken]) -> Vec<(Range, Range)> {
    let mut spans: Vec<(TimeCode, TimeCode)> = r.iter().chain(h).map(|t| (t.start, t.end)).collect();
    spans.sort();
    // Component boundaries: start times where a new chunk begins.
    let mut cuts: Vec<TimeCode> = Vec::new();
    let mut reach: Option<TimeCode> = None;
    for (s, e) in spans {
        match reach {
            Some(end) if s < end => reach = Some(end.max(e)),
            _ => {
                cuts.push(s);
                reach = Some(e);
            }
        }
    }
    let chunk_of = |t: &TimedToken| cuts.partition_point(|&c| c <= t.start) - 1;
    let ranges = |toks: &[TimedToken]| {
        let mut out: Vec<Range> = vec![0..0; cuts.len()];
        let mut i = 0;
        while i < toks.len() {
            let c = chunk_of(&toks[i]);
            let begin = i;
            while i < toks.len() && chunk_of(&toks[i]) == c {
                i += 1;
            }
            // Cue starts are non-decreasing, so each chunk is contiguous.
            debug_assert!(out[c].is_empty());
            out[c] = begin..i;
        }
        out
    };
    let rr = ranges(r);
    let hr = ranges(h);
    rr.into_iter().zip(hr).collect()
}

#[derive(Debug, Default)]
struct ChunkOutcome {
    word_edits: usize,
    break_edits: usize,
    shifts: usize,
}

struct Pair {
    r: usize,
    /// Hypothesis token id (position in the original chunk order).
    h: usize,
    weight: u32,
}

struct ChunkAligner<'a> {
    r: &'a [TimedToken],
    h: &'a [TimedToken],
    cfg: &'a SuberConfig,
    pairs: Vec<Pair>,
    /// Reference positions each hypothesis token matches exactly.
    matches_of: Vec<Vec<usize>>,
}

struct Evaluation {
    cost: usize,
    ops: Vec<EditOp>,
}

impl<'a> ChunkAligner<'a> {
    fn new(r: &'a [TimedToken], h: &'a [TimedToken], cfg: &'a SuberConfig) -> Self {
        let mut pairs = Vec::new();
        let mut matches_of = vec![Vec::new(); h.len()];
        for (ri, rt) in r.iter().enumerate() {
            for (hi, ht) in h.iter().enumerate() {
                if let Some(is_match) = rt.pairing(ht) {
                    pairs.push(Pair { r: ri, h: hi, weight: if is_match { 2 } else { 1 } });
                    if is_match {
                        matches_of[hi].push(ri);
                    }
                }
            }
        }
        ChunkAligner { r, h, cfg, pairs, matches_of }
    }

    fn is_match(&self, ri: usize, hid: usize) -> bool {
        self.matches_of[hid].binary_search(&ri).is_ok()
    }

    fn run(&self) -> ChunkOutcome {
        let mut order: Vec<usize> = (0..self.h.len()).collect();
        let mut current = self.evaluate(&order);
        let mut shifts = 0;
        for _ in 0..self.cfg.max_shift_iterations {
            if current.cost == 0 {
                break;
            }
            match self.best_shift(&order, &current) {
                Some((next_order, next)) if next.cost < current.cost => {
                    order = next_order;
                    current = next;
                    shifts += 1;
                }
                _ => break,
            }
        }
        let mut out = ChunkOutcome { shifts, ..Default::default() };
        for op in &current.ops {
            let word = match *op {
                EditOp::Match { .. } => continue,
                EditOp::Substitute { src, .. } | EditOp::Delete { src } => self.r[src].token.is_word(),
                EditOp::Insert { tgt } => self.h[order[tgt]].token.is_word(),
            };
            if word {
                out.word_edits += 1;
            } else {
                out.break_edits += 1;
            }
        }
        out
    }

    fn best_shift(&self, order: &[usize], current: &Evaluation) -> Option<(Vec<usize>, Evaluation)> {
        let n = order.len();
        let aligned_to: HashMap<usize, usize> = current
            .ops
            .iter()
            .filter_map(|op| match *op {
                EditOp::Match { src, tgt } => Some((tgt, src)),
                _ => None,
            })
            .collect();
        // Hypothesis tokens consumed before the op covering each reference position.
        let mut hyp_before = vec![0usize; self.r.len() + 1];
        {
            let mut consumed = 0;
            for op in &current.ops {
                match *op {
                    EditOp::Match { src, .. } | EditOp::Substitute { src, .. } => {
                        hyp_before[src] = consumed;
                        consumed += 1;
                    }
                    EditOp::Delete { src } => hyp_before[src] = consumed,
                    EditOp::Insert { .. } => consumed += 1,
                }
            }
            hyp_before[self.r.len()] = consumed;
        }

        let mut best: Option<(Vec<usize>, Evaluation)> = None;
        let mut evaluated = 0;
        let mut seen = std::collections::HashSet::new();
        for s in 0..n {
            if !self.h[order[s]].token.is_word() {
                continue;
            }
            for &r0 in &self.matches_of[order[s]] {
                let mut len = 0;
                while len < self.cfg.max_shift_len
                    && s + len < n
                    && r0 + len < self.r.len()
                    && self.h[order[s + len]].token.is_word()
                    && self.is_match(r0 + len, order[s + len])
                {
                    len += 1;
                    let already = (0..len).all(|k| aligned_to.get(&(s + k)) == Some(&(r0 + k)));
                    if already {
                        continue;
                    }
                    for p in self.destinations(n, s, len, hyp_before[r0]) {
                        if !seen.insert((s, len, p)) {
                            continue;
                        }
                        if evaluated >= self.cfg.max_candidates {
                            return best;
                        }
                        evaluated += 1;
                        let candidate = shifted(order, s, len, p);
                        let eval = self.evaluate(&candidate);
                        if best.as_ref().map_or(true, |(_, b)| eval.cost < b.cost) {
                            best = Some((candidate, eval));
                        }
                    }
                }
            }
        }
        best
    }

    /// Insertion points (in the sequence with the block removed).
    fn destinations(&self, n: usize, s: usize, len: usize, anchor: usize) -> Vec<usize> {
        let last = n - len;
        if n <= self.cfg.exhaustive_destination_limit {
            return (0..=last).filter(|&p| p != s).collect();
        }
        let adjusted = if anchor > s { anchor - anchor.min(s + len).saturating_sub(s) } else { anchor };
        let mut out: Vec<usize> = [adjusted.saturating_sub(1), adjusted, adjusted + 1]
            .into_iter()
            .filter(|&p| p <= last && p != s)
            .collect();
        out.dedup();
        out
    }

    /// Time-constrained edit distance of the hypothesis in `order`.
    fn evaluate(&self, order: &[usize]) -> Evaluation {
        let mut pos = vec![0usize; order.len()];
        for (p, &hid) in order.iter().enumerate() {
            pos[hid] = p;
        }
        // (ref position, hyp position, weight), ref ascending, hyp descending.
        let mut cells: Vec<(usize, usize, u32)> = self.pairs.iter().map(|p| (p.r, pos[p.h], p.weight)).collect();
        cells.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));

        let m = order.len();
        let mut tree = PrefixMax::new(m);
        let mut value = vec![0u32; cells.len()];
        let mut prev: Vec<Option<usize>> = vec![None; cells.len()];
        let mut i = 0;
        while i < cells.len() {
            let row = cells[i].0;
            let mut k = i;
            while k < cells.len() && cells[k].0 == row {
                let (_, j, w) = cells[k];
                let (v, from) = tree.query(j);
                value[k] = v + w;
                prev[k] = from;
                k += 1;
            }
            for c in i..k {
                tree.update(cells[c].1, value[c], c);
            }
            i = k;
        }
        let (total, mut tail) = tree.query(m);
        let mut chain = Vec::new();
        while let Some(c) = tail {
            chain.push(c);
            tail = prev[c];
        }
        chain.reverse();

        let mut ops = Vec::with_capacity(self.r.len() + m);
        let (mut ri, mut hj) = (0, 0);
        for c in chain {
            let (r, h, w) = cells[c];
            ops.extend((ri..r).map(|src| EditOp::Delete { src }));
            ops.extend((hj..h).map(|tgt| EditOp::Insert { tgt }));
            ops.push(if w == 2 { EditOp::Match { src: r, tgt: h } } else { EditOp::Substitute { src: r, tgt: h } });
            ri = r + 1;
            hj = h + 1;
        }
        ops.extend((ri..self.r.len()).map(|src| EditOp::Delete { src }));
        ops.extend((hj..m).map(|tgt| EditOp::Insert { tgt }));
        Evaluation { cost: self.r.len() + m - total as usize, ops }
    }
}

/// Moves `order[s..s+len]` so that it starts at `p` in the remaining sequence.
fn shifted(order: &[usize], s: usize, len: usize, p: usize) -> Vec<usize> {
    let block = &order[s..s + len];
    let mut rest: Vec<usize> = order[..s].iter().chain(&order[s + len..]).copied().collect();
    rest.splice(p..p, block.iter().copied());
    rest
}

/// Fenwick tree over hypothesis positions answering "best chain value
/// ending strictly before position j".
struct PrefixMax {
    tree: Vec<(u32, Option<usize>)>,
}

impl PrefixMax {
    fn new(n: usize) -> Self {
        PrefixMax { tree: vec![(0, None); n + 1] }
    }

    /// Maximum over positions `< j`.
    fn query(&self, j: usize) -> (u32, Option<usize>) {
        let mut best = (0, None);
        let mut i = j;
        while i > 0 {
            if self.tree[i].0 > best.0 {
                best = self.tree[i];
            }
            i &= i - 1;
        }
        best
    }

    fn update(&mut self, j: usize, v: u32, id: usize) {
        let mut i = j + 1;
        while i < self.tree.len() {
            if v > self.tree[i].0 {
                self.tree[i] = (v, Some(id));
            }
            i += i & i.wrapping_neg();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(cues: &[(u64, u64, &[&str])]) -> SubtitleFile {
        SubtitleFile::from_parts(cues.iter().map(|&(s, e, lines)| {
            (TimeCode::from_millis(s), TimeCode::from_millis(e), lines.iter().map(|l| l.to_string()).collect())
        }))
        .unwrap()
    }

    #[test]
    fn identical_scores_zero() {
        let f = file(&[(0, 2000, &["a b", "c"]), (2500, 4000, &["d e"])]);
        let s = suber(&f, &f).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!(s.denom, 8);
    }

    #[test]
    fn split_cue_costs_break_edits_only() {
        let r = file(&[(0, 4000, &["a b", "c d"])]);
        let h = file(&[(0, 2000, &["a b"]), (2000, 4000, &["c d"])]);
        let s = suber(&r, &h).unwrap();
        assert_eq!(s.word_edits, 0);
        assert_eq!(s.break_edits, 1);
        assert_eq!(s.shifts, 0);
    }

    #[test]
    fn swapped_blocks_cost_one_shift() {
        let r = file(&[(0, 4000, &["a b c d"])]);
        let h = file(&[(0, 4000, &["c d a b"])]);
        let s = suber(&r, &h).unwrap();
        assert_eq!((s.shifts, s.word_edits, s.break_edits, s.denom), (1, 0, 0, 5));
        assert!((s.score - 0.2).abs() < 1e-12);
    }

    #[test]
    fn words_in_disjoint_time_never_match() {
        let r = file(&[(0, 1000, &["ciao"])]);
        let h = file(&[(5000, 6000, &["ciao"])]);
        let s = suber(&r, &h).unwrap();
        // delete word + break, insert word + break
        assert_eq!((s.word_edits, s.break_edits), (2, 2));
    }

    #[test]
    fn empty_reference_is_an_error() {
        let h = file(&[(0, 1000, &["x"])]);
        assert_eq!(suber(&SubtitleFile::default(), &h).unwrap_err(), MetricsError::EmptyReference);
    }

    #[test]
    fn sparse_distance_matches_dense_dp() {
        use crate::align::align_by;
        let r = subtitle_tokens(&file(&[(0, 3000, &["a b", "c"]), (2000, 5000, &["b d"])]), None);
        let h = subtitle_tokens(&file(&[(0, 2500, &["a c"]), (2600, 6000, &["b", "d e"])]), None);
        let cfg = SuberConfig::default();
        let aligner = ChunkAligner::new(&r, &h, &cfg);
        let order: Vec<usize> = (0..h.len()).collect();
        let sparse = aligner.evaluate(&order).cost;
        let diag = |i: usize, j: usize| r[i].pairing(&h[j]).map(|m| (usize::from(!m), m));
        let (dense, _) = align_by(r.len(), h.len(), &diag, &|_| 1, &|_| 1, 0usize);
        assert_eq!(sparse, dense);
    }
}
