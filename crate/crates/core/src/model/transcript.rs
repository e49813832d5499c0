//! Unified ASR transcript interchange.
//!
//! The wire form is JSON with times in decimal seconds:
//!
//! ```json
//! {"model_id": "whisperx", "audio_id": "ep01", "audio_duration_s": 180.0,
//!  "segments": [{"text": "ciao mondo", "start_s": 0.0, "end_s": 1.2,
//!                "words": [{"text": "ciao", "start_s": 0.0, "end_s": 0.5, "confidence": 0.98}]}]}
//! ```
//!
//! Internally every time is held in whole milliseconds.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::timecode::TimeCode;

/// Containment slack for words at the edges of their segment.
pub const WORD_TOLERANCE_MS: u64 = 50;
/// Slack between the last segment end and the declared audio duration.
pub const DURATION_TOLERANCE_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    text: String,
    start: TimeCode,
    end: TimeCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WordError {
    #[error("word text is empty")]
    EmptyText,
    #[error("word ends before it starts")]
    Inverted,
    #[error("confidence outside [0, 1]")]
    Confidence,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start: TimeCode, end: TimeCode, confidence: Option<f64>) -> Result<Self, WordError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(WordError::EmptyText);
        }
        if start > end {
            return Err(WordError::Inverted);
        }
        if let Some(c) = confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(WordError::Confidence);
            }
        }
        Ok(TimedWord { text, start, end, confidence })
    }

    pub(crate) fn new_unchecked(text: String, start: TimeCode, end: TimeCode, confidence: Option<f64>) -> Self {
        debug_assert!(start <= end && !text.is_empty());
        TimedWord { text, start, end, confidence }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn start(&self) -> TimeCode {
        self.start
    }

    pub fn end(&self) -> TimeCode {
        self.end
    }

    pub fn confidence(&self) -> Option<f64> {
        self.confidence
    }

    /// Midpoint in milliseconds, rounded down.
    pub fn midpoint_ms(&self) -> u64 {
        (self.start.millis() + self.end.millis()) / 2
    }

    /// Same timing, different text.
    pub fn with_text(&self, text: impl Into<String>) -> TimedWord {
        TimedWord { text: text.into(), start: self.start, end: self.end, confidence: self.confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub text: String,
    pub start: TimeCode,
    pub end: TimeCode,
    pub words: Vec<TimedWord>,
}

impl TranscriptSegment {
    /// Words of this segment, or words interpolated from the segment text
    /// when the ASR output carried no word timing.
    pub fn words_or_interpolated(&self) -> Vec<TimedWord> {
        if self.words.is_empty() {
            super::srt::interpolate_words(&self.text, self.start, self.end)
        } else {
            self.words.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    /// Positions of segments that arrived without word-level timing.
    pub segments_without_words: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub model_id: String,
    pub audio_id: String,
    pub audio_duration: TimeCode,
    pub segments: Vec<TranscriptSegment>,
    pub meta: TranscriptMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptError {
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("timing violation at `{path}`: {reason}")]
    TimingViolation { path: String, reason: String },
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> TranscriptError {
    TranscriptError::SchemaViolation { path: path.into(), reason: reason.into() }
}

fn timing(path: impl Into<String>, reason: impl Into<String>) -> TranscriptError {
    TranscriptError::TimingViolation { path: path.into(), reason: reason.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, name: &str) -> Result<&'a Value, TranscriptError> {
    obj.get(name).ok_or_else(|| schema(format!("{path}.{name}"), "missing field"))
}

fn str_field(obj: &Map<String, Value>, path: &str, name: &str) -> Result<String, TranscriptError> {
    field(obj, path, name)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(format!("{path}.{name}"), "expected a string"))
}

fn time_field(obj: &Map<String, Value>, path: &str, name: &str) -> Result<TimeCode, TranscriptError> {
    let v = field(obj, path, name)?
        .as_f64()
        .ok_or_else(|| schema(format!("{path}.{name}"), "expected a number"))?;
    TimeCode::from_seconds(v).ok_or_else(|| timing(format!("{path}.{name}"), format!("invalid time {v}")))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, TranscriptError> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

/// Parses and validates the interchange JSON.
pub fn parse_transcript(raw: &[u8]) -> Result<Transcript, TranscriptError> {
    let root: Value = serde_json::from_slice(raw).map_err(|e| schema("$", e.to_string()))?;
    let root = as_object(&root, "$")?;
    let model_id = str_field(root, "$", "model_id")?;
    let audio_id = str_field(root, "$", "audio_id")?;
    let audio_duration = time_field(root, "$", "audio_duration_s")?;
    let raw_segments = field(root, "$", "segments")?
        .as_array()
        .ok_or_else(|| schema("$.segments", "expected an array"))?;

    let mut segments = Vec::with_capacity(raw_segments.len());
    let mut meta = TranscriptMeta::default();
    for (si, seg) in raw_segments.iter().enumerate() {
        let path = format!("$.segments[{si}]");
        let obj = as_object(seg, &path)?;
        let text = str_field(obj, &path, "text")?;
        let start = time_field(obj, &path, "start_s")?;
        let end = time_field(obj, &path, "end_s")?;
        if start >= end {
            return Err(timing(&path, "segment start is not before end"));
        }
        if let Some(prev) = segments.last().map(|s: &TranscriptSegment| s.start) {
            if start < prev {
                return Err(timing(&path, "segment starts before the previous segment"));
            }
        }
        let words = match obj.get("words") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(list)) => parse_words(list, &path, start, end)?,
            Some(_) => return Err(schema(format!("{path}.words"), "expected an array")),
        };
        if words.is_empty() {
            meta.segments_without_words.push(si);
        }
        segments.push(TranscriptSegment { text, start, end, words });
    }
    if let Some(last) = segments.last() {
        if last.end.millis() > audio_duration.millis() + DURATION_TOLERANCE_MS {
            return Err(timing("$.segments", "last segment ends after the audio duration"));
        }
    }
    Ok(Transcript { model_id, audio_id, audio_duration, segments, meta })
}

fn parse_words(list: &[Value], seg_path: &str, seg_start: TimeCode, seg_end: TimeCode) -> Result<Vec<TimedWord>, TranscriptError> {
    let lo = seg_start.millis().saturating_sub(WORD_TOLERANCE_MS);
    let hi = seg_end.millis() + WORD_TOLERANCE_MS;
    let mut words: Vec<TimedWord> = Vec::with_capacity(list.len());
    for (wi, w) in list.iter().enumerate() {
        let path = format!("{seg_path}.words[{wi}]");
        let obj = as_object(w, &path)?;
        let text = str_field(obj, &path, "text")?;
        let start = time_field(obj, &path, "start_s")?;
        let end = time_field(obj, &path, "end_s")?;
        let confidence = match obj.get("confidence") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| schema(format!("{path}.confidence"), "expected a number"))?),
        };
        if start.millis() < lo || end.millis() > hi {
            return Err(timing(&path, "word lies outside its segment"));
        }
        if let Some(prev) = words.last() {
            if start < prev.start {
                return Err(timing(&path, "word starts before the previous word"));
            }
        }
        let word = TimedWord::new(text, start, end, confidence).map_err(|e| match e {
            WordError::Inverted => timing(&path, e.to_string()),
            _ => schema(&path, e.to_string()),
        })?;
        words.push(word);
    }
    Ok(words)
}

#[derive(Serialize)]
struct WireWord<'a> {
    text: &'a str,
    start_s: f64,
    end_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

#[derive(Serialize)]
struct WireSegment<'a> {
    text: &'a str,
    start_s: f64,
    end_s: f64,
    words: Vec<WireWord<'a>>,
}

#[derive(Serialize)]
struct WireTranscript<'a> {
    model_id: &'a str,
    audio_id: &'a str,
    audio_duration_s: f64,
    segments: Vec<WireSegment<'a>>,
}

/// Serializes to the interchange JSON.
pub fn emit_transcript(t: &Transcript) -> Vec<u8> {
    let wire = WireTranscript {
        model_id: &t.model_id,
        audio_id: &t.audio_id,
        audio_duration_s: t.audio_duration.seconds(),
        segments: t
            .segments
            .iter()
            .map(|s| WireSegment {
                text: &s.text,
                start_s: s.start.seconds(),
                end_s: s.end.seconds(),
                words: s
                    .words
                    .iter()
                    .map(|w| WireWord {
                        text: &w.text,
                        start_s: w.start.seconds(),
                        end_s: w.end.seconds(),
                        confidence: w.confidence,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_vec_pretty(&wire).expect("transcript serialization is infallible")
}

impl Transcript {
    /// All words in order; segments without word timing contribute
    /// interpolated words.
    pub fn words(&self) -> Vec<TimedWord> {
        self.segments.iter().flat_map(TranscriptSegment::words_or_interpolated).collect()
    }

    pub fn full_text(&self) -> String {
        self.segments.iter().map(|s| s.text.trim()).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"model_id":"m","audio_id":"a","audio_duration_s":2.0,
        "segments":[{"text":"ciao mondo","start_s":0.0,"end_s":1.2,
        "words":[{"text":"ciao","start_s":0.0,"end_s":0.5},{"text":"mondo","start_s":0.6,"end_s":1.2,"confidence":0.9}]}]}"#;

    #[test]
    fn parses_one_segment() {
        let t = parse_transcript(ONE.as_bytes()).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].words.len(), 2);
        assert_eq!(t.segments[0].end.millis(), 1200);
        assert!(t.meta.segments_without_words.is_empty());
    }

    #[test]
    fn out_of_order_segments_are_timing_violations() {
        let raw = r#"{"model_id":"m","audio_id":"a","audio_duration_s":9,
            "segments":[{"text":"b","start_s":3,"end_s":4},{"text":"a","start_s":1,"end_s":2}]}"#;
        assert!(matches!(parse_transcript(raw.as_bytes()), Err(TranscriptError::TimingViolation { .. })));
    }

    #[test]
    fn missing_text_names_the_field() {
        let raw = r#"{"model_id":"m","audio_id":"a","audio_duration_s":9,
            "segments":[{"start_s":0,"end_s":1,"words":[{"text":"x","start_s":0,"end_s":1}]}]}"#;
        match parse_transcript(raw.as_bytes()).unwrap_err() {
            TranscriptError::SchemaViolation { path, .. } => assert_eq!(path, "$.segments[0].text"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_words_are_flagged() {
        let raw = r#"{"model_id":"m","audio_id":"a","audio_duration_s":9,
            "segments":[{"text":"ab cd","start_s":0,"end_s":1}]}"#;
        let t = parse_transcript(raw.as_bytes()).unwrap();
        assert_eq!(t.meta.segments_without_words, vec![0]);
        assert_eq!(t.words().len(), 2);
    }

    #[test]
    fn word_containment_tolerance() {
        let mk = |ws: f64, we: f64| {
            format!(
                r#"{{"model_id":"m","audio_id":"a","audio_duration_s":9,"segments":[{{"text":"x","start_s":1.0,"end_s":2.0,
                "words":[{{"text":"x","start_s":{ws},"end_s":{we}}}]}}]}}"#
            )
        };
        assert!(parse_transcript(mk(0.95, 2.05).as_bytes()).is_ok());
        assert!(matches!(parse_transcript(mk(0.9, 2.0).as_bytes()), Err(TranscriptError::TimingViolation { .. })));
        assert!(matches!(parse_transcript(mk(1.0, 2.1).as_bytes()), Err(TranscriptError::TimingViolation { .. })));
    }

    #[test]
    fn duration_bound() {
        let raw = r#"{"model_id":"m","audio_id":"a","audio_duration_s":1,"segments":[{"text":"x","start_s":0,"end_s":2.5}]}"#;
        assert!(matches!(parse_transcript(raw.as_bytes()), Err(TranscriptError::TimingViolation { .. })));
    }

    #[test]
    fn wrong_type_is_schema_violation() {
        let raw = r#"{"model_id":"m","audio_id":"a","audio_duration_s":"long","segments":[]}"#;
        assert!(matches!(parse_transcript(raw.as_bytes()), Err(TranscriptError::SchemaViolation { .. })));
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let t = parse_transcript(ONE.as_bytes()).unwrap();
        assert_eq!(parse_transcript(&emit_transcript(&t)).unwrap(), t);
    }
}
