use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::align::{levenshtein, normalize, NormSpec};
use crate::model::TimedWord;

/// Edit counts behind a word error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// `(S + D + I) / N` from the minimal alignment of `hyp` onto `reference`.
pub fn wer<T: PartialEq>(reference: &[T], hyp: &[T]) -> Result<WerBreakdown, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let counts = levenshtein(reference, hyp).counts();
    let edits = counts.substitutions + counts.deletions + counts.insertions;
    Ok(WerBreakdown {
        substitutions: counts.substitutions,
        deletions: counts.deletions,
        insertions: counts.insertions,
        ref_len: reference.len(),
        wer: edits as f64 / reference.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowOutcome {
    Scored(WerBreakdown),
    /// No reference speech in the window; hypothesis words here are
    /// unmatched speech rather than an unbounded error rate.
    EmptyWindow { unmatched_hyp_words: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: usize,
    pub ref_words: Vec<String>,
    pub hyp_words: Vec<String>,
    pub outcome: WindowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedWer {
    pub window_seconds: u32,
    pub rows: Vec<WindowRow>,
    /// Total hypothesis words falling in windows with no reference words.
    pub unmatched_speech_words: usize,
}

impl WindowedWer {
    pub fn scored(&self) -> impl Iterator<Item = (usize, &WerBreakdown)> {
        self.rows.iter().filter_map(|r| match &r.outcome {
            WindowOutcome::Scored(b) => Some((r.window, b)),
            WindowOutcome::EmptyWindow { .. } => None,
        })
    }

    pub fn max_wer(&self) -> Option<f64> {
        self.scored().map(|(_, b)| b.wer).reduce(f64::max)
    }

    pub fn min_wer(&self) -> Option<f64> {
        self.scored().map(|(_, b)| b.wer).reduce(f64::min)
    }
}

/// Window index of a word: `floor(midpoint / window)`, half-open windows.
pub fn window_of(word: &TimedWord, window_seconds: u32) -> usize {
    (word.midpoint_ms() / (u64::from(window_seconds) * 1000)) as usize
}

/// WER per fixed-length window, words assigned by midpoint.
///
/// Word texts are compared as given; see [`normalize_words`].
pub fn windowed_wer(reference: &[TimedWord], hyp: &[TimedWord], window_seconds: u32) -> WindowedWer {
    assert!(window_seconds > 0, "window length must be positive");
    let count = reference
        .iter()
        .chain(hyp)
        .map(|w| window_of(w, window_seconds) + 1)
        .max()
        .unwrap_or(0);
    let mut refs: Vec<Vec<String>> = vec![Vec::new(); count];
    let mut hyps: Vec<Vec<String>> = vec![Vec::new(); count];
    for w in reference {
        refs[window_of(w, window_seconds)].push(w.text().to_string());
    }
    for w in hyp {
        hyps[window_of(w, window_seconds)].push(w.text().to_string());
    }
    let mut unmatched = 0;
    let rows = refs
        .into_iter()
        .zip(hyps)
        .enumerate()
        .map(|(window, (ref_words, hyp_words))| {
            let outcome = match wer(&ref_words, &hyp_words) {
                Ok(b) => WindowOutcome::Scored(b),
                Err(_) => {
                    unmatched += hyp_words.len();
                    WindowOutcome::EmptyWindow { unmatched_hyp_words: hyp_words.len() }
                }
            };
            WindowRow { window, ref_words, hyp_words, outcome }
        })
        .collect();
    WindowedWer { window_seconds, rows, unmatched_speech_words: unmatched }
}

/// Normalizes each word's text, keeping its timing. A word may yield
/// several tokens (e.g. hyphenated compounds) or none (pure punctuation).
pub fn normalize_words(words: &[TimedWord], spec: &NormSpec) -> Vec<TimedWord> {
    words
        .iter()
        .flat_map(|w| normalize(w.text(), spec).into_iter().map(move |t| w.with_text(t)))
        .collect()
}
