//! SubRip model and codec.
//!
//! Parsing normalizes a leading byte-order mark and CRLF/CR line endings to
//! LF; emission always writes LF. A block is
//!
//! ```text
//! index
//! HH:MM:SS,mmm --> HH:MM:SS,mmm
//! line 1
//! [line 2 ...]
//! <blank line>
//! ```
//!
//! so `emit_srt(parse_srt(x)?)` is a fixed point after a single cycle.

use serde::{Deserialize, Serialize};

use super::timecode::TimeCode;
use super::transcript::TimedWord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CueError {
    #[error("cue index must be positive")]
    ZeroIndex,
    #[error("cue start {start} is not before end {end}")]
    InvertedTiming { start: TimeCode, end: TimeCode },
    #[error("cue has no text lines")]
    NoLines,
    #[error("cue line {0} is empty after trimming")]
    BlankLine(usize),
    #[error("cue line {0} contains a line break")]
    EmbeddedNewline(usize),
    #[error("timecode {0} exceeds the two-digit hour range")]
    OutOfRange(TimeCode),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SrtError {
    #[error("block {block}: malformed timecode line `{line}`")]
    MalformedTimecode { block: usize, line: String },
    #[error("block {block}: malformed index `{line}`")]
    MalformedIndex { block: usize, line: String },
    #[error("block {block}: index {index} does not follow {previous}")]
    NonMonotonicIndex { block: usize, index: u32, previous: u32 },
    #[error("block {block}: cue has no text")]
    EmptyCueText { block: usize },
    #[error("block {block}: start is not before end")]
    InvertedTiming { block: usize },
    #[error("block {block}: cue starts before the previous cue")]
    UnorderedStart { block: usize },
    #[error("input is not valid UTF-8: {0}")]
    Encoding(String),
}

impl SrtError {
    /// 1-based block number the error refers to, if any.
    pub fn block(&self) -> Option<usize> {
        match self {
            SrtError::MalformedTimecode { block, .. }
            | SrtError::MalformedIndex { block, .. }
            | SrtError::NonMonotonicIndex { block, .. }
            | SrtError::EmptyCueText { block }
            | SrtError::InvertedTiming { block }
            | SrtError::UnorderedStart { block } => Some(*block),
            SrtError::Encoding(_) => None,
        }
    }
}

/// One subtitle block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    index: u32,
    start: TimeCode,
    end: TimeCode,
    lines: Vec<String>,
}

impl Cue {
    pub fn new(index: u32, start: TimeCode, end: TimeCode, lines: Vec<String>) -> Result<Self, CueError> {
        if index == 0 {
            return Err(CueError::ZeroIndex);
        }
        if start >= end {
            return Err(CueError::InvertedTiming { start, end });
        }
        if !end.is_srt_renderable() {
            return Err(CueError::OutOfRange(end));
        }
        if lines.is_empty() {
            return Err(CueError::NoLines);
        }
        for (i, line) in lines.iter().enumerate() {
            if line.contains(['\n', '\r']) {
                return Err(CueError::EmbeddedNewline(i));
            }
            if line.trim().is_empty() {
                return Err(CueError::BlankLine(i));
            }
        }
        Ok(Cue { index, start, end, lines })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn start(&self) -> TimeCode {
        self.start
    }

    pub fn end(&self) -> TimeCode {
        self.end
    }

    pub fn duration_ms(&self) -> u64 {
        self.end.millis() - self.start.millis()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Lines joined with single spaces.
    pub fn text(&self) -> String {
        self.lines.join(" ")
    }

    /// Copy of this cue with replaced lines; timing and index unchanged.
    pub fn with_lines(&self, lines: Vec<String>) -> Result<Cue, CueError> {
        Cue::new(self.index, self.start, self.end, lines)
    }

    pub fn overlaps(&self, other: &Cue) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// An ordered list of cues.
///
/// Equality compares cues only; `source_label` is bookkeeping metadata and
/// is not carried by the SRT encoding.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubtitleFile {
    cues: Vec<Cue>,
    pub source_label: String,
}

impl PartialEq for SubtitleFile {
    fn eq(&self, other: &Self) -> bool {
        self.cues == other.cues
    }
}

impl Eq for SubtitleFile {}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FileError {
    #[error("cue {position}: index {index} does not follow {previous}")]
    NonMonotonicIndex { position: usize, index: u32, previous: u32 },
    #[error("cue {position}: starts before the previous cue")]
    UnorderedStart { position: usize },
    #[error("cue {position}: {source}")]
    Cue { position: usize, source: CueError },
}

impl SubtitleFile {
    pub fn new(cues: Vec<Cue>) -> Result<Self, FileError> {
        for (pos, pair) in cues.windows(2).enumerate() {
            if pair[1].index <= pair[0].index {
                return Err(FileError::NonMonotonicIndex {
                    position: pos + 1,
                    index: pair[1].index,
                    previous: pair[0].index,
                });
            }
            if pair[1].start < pair[0].start {
                return Err(FileError::UnorderedStart { position: pos + 1 });
            }
        }
        Ok(SubtitleFile { cues, source_label: String::new() })
    }

    /// Builds a file from (start, end, lines) triples, numbering cues from 1.
    pub fn from_parts<I>(parts: I) -> Result<Self, FileError>
    where
        I: IntoIterator<Item = (TimeCode, TimeCode, Vec<String>)>,
    {
        let cues = parts
            .into_iter()
            .enumerate()
            .map(|(i, (s, e, lines))| {
                Cue::new(i as u32 + 1, s, e, lines).map_err(|source| FileError::Cue { position: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        SubtitleFile::new(cues)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn cues(&self) -> &[Cue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    /// Replaces cue texts while keeping indices and timings.
    pub(crate) fn map_cues(&self, cues: Vec<Cue>) -> SubtitleFile {
        debug_assert_eq!(cues.len(), self.cues.len());
        SubtitleFile { cues, source_label: self.source_label.clone() }
    }

    /// Pairs of adjacent cue positions whose time spans overlap.
    pub fn overlaps(&self) -> Vec<(usize, usize)> {
        self.cues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].end > w[1].start)
            .map(|(i, _)| (i, i + 1))
            .collect()
    }

    /// All cue text joined with spaces.
    pub fn full_text(&self) -> String {
        self.cues.iter().map(Cue::text).collect::<Vec<_>>().join(" ")
    }
}

fn normalize_newlines(text: &str) -> String {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Parses SubRip bytes.
///
/// Blank or whitespace-only lines separate blocks. Overlapping cues are
/// accepted and logged.
pub fn parse_srt(raw: &[u8]) -> Result<SubtitleFile, SrtError> {
    let text = std::str::from_utf8(raw).map_err(|e| SrtError::Encoding(e.to_string()))?;
    let text = normalize_newlines(text);

    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.split('\n') {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }

    let mut cues: Vec<Cue> = Vec::with_capacity(blocks.len());
    for (i, block) in blocks.iter().enumerate() {
        let block_no = i + 1;
        let index_line = block[0].trim();
        let index: u32 = index_line
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| SrtError::MalformedIndex { block: block_no, line: index_line.to_string() })?;
        if let Some(prev) = cues.last() {
            if index <= prev.index {
                return Err(SrtError::NonMonotonicIndex { block: block_no, index, previous: prev.index });
            }
        }
        let timing = block.get(1).ok_or(SrtError::MalformedTimecode { block: block_no, line: String::new() })?;
        let (start, end) = parse_timing_line(timing)
            .ok_or_else(|| SrtError::MalformedTimecode { block: block_no, line: timing.to_string() })?;
        if start >= end {
            return Err(SrtError::InvertedTiming { block: block_no });
        }
        let lines: Vec<String> = block[2..].iter().map(|l| l.to_string()).collect();
        if lines.is_empty() {
            return Err(SrtError::EmptyCueText { block: block_no });
        }
        if let Some(prev) = cues.last() {
            if start < prev.start {
                return Err(SrtError::UnorderedStart { block: block_no });
            }
            if prev.end > start {
                log::warn!("block {block_no}: cue overlaps the previous cue");
            }
        }
        cues.push(Cue { index, start, end, lines });
    }
    Ok(SubtitleFile { cues, source_label: String::new() })
}

fn parse_timing_line(line: &str) -> Option<(TimeCode, TimeCode)> {
    let (a, b) = line.split_once("-->")?;
    let start = a.trim().parse().ok()?;
    // Trailing positional hints after the end timecode are ignored.
    let end = b.split_whitespace().next()?.parse().ok()?;
    Some((start, end))
}

/// Emits SubRip bytes with LF endings and one blank line between blocks.
pub fn emit_srt(file: &SubtitleFile) -> Vec<u8> {
    let mut out = String::new();
    for (i, cue) in file.cues.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{}\n{} --> {}\n", cue.index, cue.start, cue.end));
        for line in &cue.lines {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.into_bytes()
}

/// Word-level timing for a subtitle file that only carries cue timing.
///
/// Each cue's text (lines joined by a space, trimmed) is split on
/// whitespace. A word covering characters `[a, b)` of an `L`-character
/// text receives `start + dur·a/L` to `start + dur·b/L`, rounded to the
/// millisecond. Inter-word spaces count towards `L`.
pub fn reference_words(file: &SubtitleFile) -> Vec<TimedWord> {
    let mut out = Vec::new();
    for cue in &file.cues {
        out.extend(interpolate_words(&cue.text(), cue.start, cue.end));
    }
    out
}

pub(crate) fn interpolate_words(text: &str, start: TimeCode, end: TimeCode) -> Vec<TimedWord> {
    let text = text.trim();
    let chars: Vec<char> = text.chars().collect();
    let total = chars.len() as u64;
    if total == 0 {
        return Vec::new();
    }
    let dur = end.millis().saturating_sub(start.millis());
    let at = |offset: usize| {
        let num = dur * offset as u64;
        TimeCode::from_millis(start.millis() + (num + total / 2) / total)
    };
    let mut words = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let begin = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let word: String = chars[begin..i].iter().collect();
        words.push(TimedWord::new_unchecked(word, at(begin), at(i), None));
    }
    words
}
