//! Builds readability-compliant subtitles from word-timed transcripts.
//!
//! Cue boundaries are chosen by a dynamic program over inter-word gaps.
//! Hard limits (maximum NCS, MSD and CPS, at most two lines) are never
//! violated; soft minimums and weak break points only add penalty. Long
//! silences force a boundary.

use serde::{Deserialize, Serialize};

use crate::metrics::{classify, cps_of, ReadabilityLimits, Violation};
use crate::model::{FileError, SubtitleFile, TimeCode, TimedWord};

/// Italian and English coordinating/subordinating conjunctions; a break
/// right before one of these reads naturally.
const CONJUNCTIONS: &[&str] = &[
    "e", "ed", "o", "od", "ma", "però", "perché", "perche", "che", "quando", "mentre", "se", "oppure", "quindi",
    "dunque", "poiché", "anche", "and", "but", "or", "so", "because", "when", "while", "if", "that", "which",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BreakStrength {
    Any = 1,
    Conjunction = 2,
    Clause = 3,
    SentenceFinal = 4,
}

impl BreakStrength {
    /// Strength of a break between `prev` and `next`.
    pub fn between(prev: &str, next: &str) -> Self {
        let tail = prev.trim_end_matches(|c: char| matches!(c, '"' | '\'' | ')' | ']' | '»' | '”' | '’'));
        match tail.chars().last() {
            Some('.' | '?' | '!' | '…') => BreakStrength::SentenceFinal,
            Some(',' | ';' | ':') => BreakStrength::Clause,
            _ => {
                let head: String = next
                    .trim_start_matches(|c: char| !c.is_alphanumeric())
                    .chars()
                    .take_while(|c| c.is_alphanumeric())
                    .flat_map(char::to_lowercase)
                    .collect();
                if CONJUNCTIONS.contains(&head.as_str()) {
                    BreakStrength::Conjunction
                } else {
                    BreakStrength::Any
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakPoint {
    /// Gap after word `position`.
    pub position: usize,
    pub strength: BreakStrength,
    pub silence_ms: u64,
}

pub fn break_points(words: &[TimedWord]) -> Vec<BreakPoint> {
    words
        .windows(2)
        .enumerate()
        .map(|(i, w)| BreakPoint {
            position: i,
            strength: BreakStrength::between(w[0].text(), w[1].text()),
            silence_ms: w[1].start().millis().saturating_sub(w[0].end().millis()),
        })
        .collect()
}

/// Integer penalties; the optimum is exact, with no float ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyWeights {
    pub sentence_final: u64,
    pub clause: u64,
    pub conjunction: u64,
    pub any: u64,
    pub ncs_low: u64,
    pub msd_low: u64,
    pub cps_low: u64,
    pub per_cue: u64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights { sentence_final: 0, clause: 10, conjunction: 20, any: 30, ncs_low: 15, msd_low: 10, cps_low: 5, per_cue: 1 }
    }
}

impl PenaltyWeights {
    pub fn for_strength(&self, s: BreakStrength) -> u64 {
        match s {
            BreakStrength::SentenceFinal => self.sentence_final,
            BreakStrength::Clause => self.clause,
            BreakStrength::Conjunction => self.conjunction,
            BreakStrength::Any => self.any,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub limits: ReadabilityLimits,
    pub max_line_chars: usize,
    pub hard_silence_split_ms: u64,
    pub penalties: PenaltyWeights,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig { limits: ReadabilityLimits::default(), max_line_chars: 37, hard_silence_split_ms: 1500, penalties: PenaltyWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("token `{0}` is longer than a line")]
    Unsplittable(String),
    #[error("text does not fit in two lines")]
    ExceedsTwoLines,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("no words to segment")]
    Empty,
    #[error("words are not sorted by start time (word {0})")]
    Unsorted(usize),
    #[error("word {index} `{word}` cannot form a compliant cue on its own: {reason}")]
    InfeasibleSegment { index: usize, word: String, reason: String },
    #[error(transparent)]
    File(#[from] FileError),
}

/// Lays text out on one line, or two lines broken at a space.
///
/// Among breaks leaving both lines within `max_line_chars`, the strongest
/// punctuation wins, then the one closest to the middle, then the earlier.
pub fn split_lines(text: &str, max_line_chars: usize) -> Result<Vec<String>, SplitError> {
    let text = text.trim();
    let len = text.chars().count();
    if len <= max_line_chars {
        return Ok(vec![text.to_string()]);
    }
    let tokens: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();
    if let Some(t) = tokens.iter().find(|t| t.chars().count() > max_line_chars) {
        return Err(SplitError::Unsplittable(t.to_string()));
    }
    let total: usize = tokens.iter().map(|t| t.chars().count()).sum::<usize>() + tokens.len() - 1;
    let mut best: Option<(BreakStrength, usize, usize)> = None;
    let mut left = 0;
    for k in 1..tokens.len() {
        left += tokens[k - 1].chars().count() + usize::from(k > 1);
        let right = total - left - 1;
        if left > max_line_chars || right > max_line_chars {
            continue;
        }
        let strength = BreakStrength::between(tokens[k - 1], tokens[k]);
        let off = left.abs_diff(right);
        let better = match best {
            None => true,
            Some((s, o, _)) => strength > s || (strength == s && off < o),
        };
        if better {
            best = Some((strength, off, k));
        }
    }
    let (_, _, k) = best.ok_or(SplitError::ExceedsTwoLines)?;
    Ok(vec![tokens[..k].join(" "), tokens[k..].join(" ")])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub file: SubtitleFile,
    /// Word index ranges `[start, end)` per cue.
    pub spans: Vec<(usize, usize)>,
    pub penalty: u64,
}

struct Candidate {
    lines: Vec<String>,
    start: TimeCode,
    end: TimeCode,
    cost: u64,
}

struct Planner<'a> {
    words: &'a [TimedWord],
    bps: Vec<BreakPoint>,
    cfg: &'a SegmenterConfig,
}

impl Planner<'_> {
    fn forced(&self, gap: usize) -> bool {
        self.bps[gap].silence_ms >= self.cfg.hard_silence_split_ms
    }

    /// Display end of a cue ending at word `j - 1`: the word end, clipped so
    /// it never runs past the next word's start.
    fn end_of(&self, j: usize) -> TimeCode {
        let e = self.words[j - 1].end();
        match self.words.get(j) {
            Some(next) if next.start() < e => next.start(),
            _ => e,
        }
    }

    /// Cue for words `i..j`, or why it breaks a hard limit.
    fn cue(&self, i: usize, j: usize) -> Result<Candidate, String> {
        let text = self.words[i..j].iter().map(|w| w.text()).collect::<Vec<_>>().join(" ");
        let lines = split_lines(&text, self.cfg.max_line_chars).map_err(|e| e.to_string())?;
        let start = self.words[i].start();
        let end = self.end_of(j);
        let dur = end.millis().saturating_sub(start.millis());
        if dur == 0 {
            return Err("zero display time".into());
        }
        let ncs: usize = lines.iter().map(|l| l.chars().count()).sum();
        let msd = dur as f64 / 1000.0;
        let violations = classify(ncs, msd, cps_of(ncs, dur), &self.cfg.limits);
        if let Some(v) = violations.iter().find(|v| v.is_hard()) {
            return Err(v.label().to_string());
        }
        let p = &self.cfg.penalties;
        let mut cost = p.per_cue;
        for v in violations {
            cost += match v {
                Violation::NcsLow => p.ncs_low,
                Violation::MsdLow => p.msd_low,
                Violation::CpsLow => p.cps_low,
                _ => 0,
            };
        }
        if j < self.words.len() && !self.forced(j - 1) {
            cost += p.for_strength(self.bps[j - 1].strength);
        }
        Ok(Candidate { lines, start, end, cost })
    }
}

/// Segments and reports the optimal penalty along with word spans.
///
/// A word too fast or too long to stand alone is fine as long as some
/// compliant cue contains it; the error names a word only when no
/// compliant segmentation exists.
pub fn segment_detailed(words: &[TimedWord], cfg: &SegmenterConfig) -> Result<Segmentation, SegmentError> {
    if words.is_empty() {
        return Err(SegmentError::Empty);
    }
    if let Some(i) = (1..words.len()).find(|&i| words[i].start() < words[i - 1].start()) {
        return Err(SegmentError::Unsorted(i));
    }
    let planner = Planner { words, bps: break_points(words), cfg };

    let n = words.len();
    // best[j]: minimal penalty covering words[..j]; back[j]: start of the last cue.
    let mut best: Vec<Option<u64>> = vec![None; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = Some(0);
    // Cues can only grow until the text no longer fits the NCS limit.
    let max_chars = cfg.limits.ncs_max.min(2 * cfg.max_line_chars) + 1;
    for i in 0..n {
        let Some(base) = best[i] else { continue };
        let mut chars = 0usize;
        for j in i + 1..=n {
            chars += words[j - 1].text().chars().count() + usize::from(j > i + 1);
            if chars > max_chars {
                break;
            }
            if let Ok(c) = planner.cue(i, j) {
                let total = base + c.cost;
                if best[j].is_none_or(|b| total < b) {
                    best[j] = Some(total);
                    back[j] = i;
                }
            }
            if j < n && planner.forced(j - 1) {
                break;
            }
        }
    }
    let Some(penalty) = best[n] else {
        // If every word could stand alone the singleton cover would be
        // feasible, so some word cannot; report the first.
        let (index, reason) = (0..n)
            .find_map(|i| planner.cue(i, i + 1).err().map(|r| (i, r)))
            .expect("an infeasible input has an infeasible word");
        return Err(SegmentError::InfeasibleSegment { index, word: words[index].text().to_string(), reason });
    };
    let mut spans = Vec::new();
    let mut j = n;
    while j > 0 {
        spans.push((back[j], j));
        j = back[j];
    }
    spans.reverse();
    let parts = spans.iter().map(|&(i, j)| {
        let c = planner.cue(i, j).expect("chosen cue is feasible");
        (c.start, c.end, c.lines)
    });
    let file = SubtitleFile::from_parts(parts.collect::<Vec<_>>())?;
    Ok(Segmentation { file, spans, penalty })
}

pub fn segment(words: &[TimedWord], cfg: &SegmenterConfig) -> Result<SubtitleFile, SegmentError> {
    segment_detailed(words, cfg).map(|s| s.file)
}
