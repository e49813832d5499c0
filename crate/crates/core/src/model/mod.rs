//! Subtitle and transcript data model with their codecs.

mod srt;
mod timecode;
mod transcript;

pub use srt::{emit_srt, parse_srt, reference_words, Cue, CueError, FileError, SrtError, SubtitleFile};
pub use timecode::{TimeCode, TimeCodeParseError, MAX_SRT_MILLIS};
pub use transcript::{
    emit_transcript, parse_transcript, TimedWord, Transcript, TranscriptError, TranscriptMeta, TranscriptSegment,
    WordError, DURATION_TOLERANCE_MS, WORD_TOLERANCE_MS,
};
