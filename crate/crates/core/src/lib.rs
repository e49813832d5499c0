//! Subtitle quality assurance: codecs for SubRip and ASR transcripts,
//! transcription and subtitling metrics, readability-driven segmentation,
//! an LLM review protocol and a corpus evaluation harness.

pub mod align;
pub mod entities;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod reviewer;
pub mod segmenter;
