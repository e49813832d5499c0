//! Transcription and subtitling metrics.

mod readability;
mod semantic;
mod suber;
mod wer;

pub use readability::{
    classify, cps_of, measure_cue, ncs_of_lines, readability, CueReadability, ReadabilityLimits, ReadabilityReport,
    Violation,
};
pub use semantic::{
    semantic_report, LexicalScorer, PairScore, RemoteScorer, RemoteScorerConfig, ScorerError, SemanticError,
    SemanticReport, SemanticScorer,
};
pub use suber::{subtitle_tokens, suber, suber_tokens, suber_with, SubToken, SuberConfig, SuberScore, TimedToken};
pub use wer::{normalize_words, wer, window_of, windowed_wer, WerBreakdown, WindowOutcome, WindowRow, WindowedWer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("cue {index} has zero duration")]
    ZeroDuration { index: u32 },
}
