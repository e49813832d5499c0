//! Corpus evaluation: runs every metric over (episode, model) pairs listed
//! in a manifest, plus cost models and report emission.
//!
//! Manifest (TOML, or JSON with the same shape), paths relative to it:
//!
//! ```toml
//! [[episodes]]
//! episode_id = "ep01"
//! typology = "TalkShow"
//! reference = "ep01/reference.srt"
//! entities = "ep01/entities.jsonl"
//! audio_duration_s = 1800.0
//! [episodes.hypotheses]
//! whisperx = "ep01/whisperx.json"
//! "whisperx@reviewed" = "ep01/whisperx.reviewed.srt"
//!
//! [metrics]
//! semantic = false
//! window_s = 60
//! ```
//!
//! A hypothesis ending in `.json` is a transcript and is segmented into
//! subtitles before subtitle metrics; anything else is read as SubRip.

mod cost;
mod report;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_sentences, split_sentences, NormSpec};
use crate::entities::{eer, load_entities, EerConfig};
use crate::metrics::{
    normalize_words, readability, semantic_report, suber_with, wer, windowed_wer, ReadabilityLimits, SemanticScorer,
    SuberConfig, Violation,
};
use crate::model::{
    parse_srt, parse_transcript, reference_words, SubtitleFile, TimeCode, TimedWord, Transcript, TranscriptSegment,
};
use crate::segmenter::{segment, SegmenterConfig};

pub use cost::{cost, rtfx, CostError, CostKind, CostModel, RtfxStat};
pub use report::{
    boxplot, emit_report, load_report, merge_reports, quantile, review_gains, rows_csv, write_plots, BoxplotStats, ReportError, ReportFormat,
    ReviewGain, ReviewGainSeries, REPORT_COLUMNS, REVIEWED_SUFFIX,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Typology {
    #[serde(alias = "talk_show")]
    TalkShow,
    #[serde(alias = "investigative_journalism")]
    InvestigativeJournalism,
    #[serde(alias = "scientific_communication")]
    ScientificCommunication,
}

impl Typology {
    pub fn label(self) -> &'static str {
        match self {
            Typology::TalkShow => "TalkShow",
            Typology::InvestigativeJournalism => "InvestigativeJournalism",
            Typology::ScientificCommunication => "ScientificCommunication",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: String,
    pub typology: Typology,
    pub reference: PathBuf,
    /// Model id to hypothesis path.
    pub hypotheses: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub entities: Option<PathBuf>,
    pub audio_duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricToggles {
    pub wer: bool,
    pub suber: bool,
    pub eer: bool,
    pub readability: bool,
    pub semantic: bool,
    pub window_s: u32,
}

impl Default for MetricToggles {
    fn default() -> Self {
        MetricToggles { wer: true, suber: true, eer: true, readability: true, semantic: true, window_s: 60 }
    }
}

impl MetricToggles {
    /// Keeps only the named metrics (`wer,suber,eer,readability,semantic`).
    pub fn only(mut self, names: &[&str]) -> Result<Self, String> {
        for n in names {
            if !["wer", "suber", "eer", "readability", "semantic"].contains(n) {
                return Err(format!("unknown metric `{n}`"));
            }
        }
        self.wer = names.contains(&"wer");
        self.suber = names.contains(&"suber");
        self.eer = names.contains(&"eer");
        self.readability = names.contains(&"readability");
        self.semantic = names.contains(&"semantic");
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRunSpec {
    pub episodes: Vec<EpisodeSpec>,
    #[serde(default)]
    pub metrics: MetricToggles,
    #[serde(default)]
    pub eer: EerConfig,
    #[serde(default)]
    pub segmenter: SegmenterConfig,
    #[serde(default)]
    pub suber: SuberConfig,
    #[serde(default)]
    pub readability: ReadabilityLimits,
    #[serde(default)]
    pub wer_norm: NormSpec,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid run spec: {0}")]
    SpecInvalid(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CorpusRunSpec {
    pub fn from_toml(raw: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut spec: CorpusRunSpec = toml::from_str(raw).map_err(|e| HarnessError::SpecInvalid(e.to_string()))?;
        spec.base_dir = base_dir.into();
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(raw: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut spec: CorpusRunSpec = serde_json::from_str(raw).map_err(|e| HarnessError::SpecInvalid(e.to_string()))?;
        spec.base_dir = base_dir.into();
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a `.json` or TOML manifest; paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&raw, base)
        } else {
            Self::from_toml(&raw, base)
        }
    }

    /// Structural checks only; unreadable files surface as row errors.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::SpecInvalid(m));
        if self.episodes.is_empty() {
            return invalid("no episodes".into());
        }
        if self.metrics.window_s == 0 {
            return invalid("window_s must be positive".into());
        }
        if self.jobs == Some(0) {
            return invalid("jobs must be positive".into());
        }
        if !(self.eer.window_ms > 0 && self.eer.similarity_threshold > 0.0 && self.eer.similarity_threshold <= 1.0) {
            return invalid("eer window must be positive and threshold in (0, 1]".into());
        }
        let mut seen = HashSet::new();
        for ep in &self.episodes {
            if ep.episode_id.trim().is_empty() {
                return invalid("empty episode_id".into());
            }
            if !seen.insert(ep.episode_id.as_str()) {
                return invalid(format!("duplicate episode_id `{}`", ep.episode_id));
            }
            if ep.hypotheses.is_empty() {
                return invalid(format!("episode `{}` lists no hypotheses", ep.episode_id));
            }
            if !(ep.audio_duration_s > 0.0) {
                return invalid(format!("episode `{}` has non-positive audio_duration_s", ep.episode_id));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode_id: String,
    pub typology: Typology,
    pub model_id: String,
    pub wer: Option<f64>,
    pub suber: Option<f64>,
    pub eer: Option<f64>,
    pub semantic: Option<f64>,
    /// Share of cues with each readability violation.
    pub readability: Option<BTreeMap<Violation, f64>>,
    pub window_wer_min: Option<f64>,
    pub window_wer_max: Option<f64>,
    /// Hypothesis words in windows with no reference speech.
    pub unmatched_speech_words: Option<usize>,
    /// Metrics that could not be computed for this row, and why.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub episode_id: String,
    pub model_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub typology: Typology,
    pub model_id: String,
    pub rows: usize,
    pub wer: Option<f64>,
    pub suber: Option<f64>,
    pub eer: Option<f64>,
    pub semantic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub errors: Vec<RowError>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per typology × model means over the rows that have each metric.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Typology, &str), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.typology, r.model_id.as_str())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((typology, model), rs)| Aggregate {
            typology,
            model_id: model.to_string(),
            rows: rs.len(),
            wer: mean_of(rs.iter().map(|r| r.wer)),
            suber: mean_of(rs.iter().map(|r| r.suber)),
            eer: mean_of(rs.iter().map(|r| r.eer)),
            semantic: mean_of(rs.iter().map(|r| r.semantic)),
        })
        .collect()
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Wraps bare words as a single-segment transcript.
pub fn transcript_from_words(model_id: &str, audio_id: &str, words: Vec<TimedWord>) -> Transcript {
    let end = words.last().map_or(TimeCode::ZERO, TimedWord::end);
    let start = words.first().map_or(TimeCode::ZERO, TimedWord::start);
    let text = words.iter().map(TimedWord::text).collect::<Vec<_>>().join(" ");
    Transcript {
        model_id: model_id.into(),
        audio_id: audio_id.into(),
        audio_duration: end,
        segments: if words.is_empty() { Vec::new() } else { vec![TranscriptSegment { text, start, end, words }] },
        meta: Default::default(),
    }
}

/// A hypothesis as both a transcript and a subtitle file.
struct Hypothesis {
    transcript: Transcript,
    subtitles: Result<SubtitleFile, String>,
}

fn load_hypothesis(path: &Path, model_id: &str, episode_id: &str, seg: &SegmenterConfig) -> Result<Hypothesis, String> {
    let raw = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let transcript = parse_transcript(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
        let subtitles = segment(&transcript.words(), seg).map_err(|e| format!("segmenting {}: {e}", path.display()));
        Ok(Hypothesis { transcript, subtitles })
    } else {
        let srt = parse_srt(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
        let transcript = transcript_from_words(model_id, episode_id, reference_words(&srt));
        Ok(Hypothesis { transcript, subtitles: Ok(srt) })
    }
}

fn evaluate_pair(
    spec: &CorpusRunSpec,
    ep: &EpisodeSpec,
    model_id: &str,
    hyp_path: &Path,
    scorer: &dyn SemanticScorer,
) -> Result<MetricsRow, String> {
    let ref_path = spec.resolve(&ep.reference);
    let reference = parse_srt(&read(&ref_path)?).map_err(|e| format!("{}: {e}", ref_path.display()))?;
    let hyp = load_hypothesis(&spec.resolve(hyp_path), model_id, &ep.episode_id, &spec.segmenter)?;
    let m = &spec.metrics;
    let mut row = MetricsRow {
        episode_id: ep.episode_id.clone(),
        typology: ep.typology,
        model_id: model_id.to_string(),
        wer: None,
        suber: None,
        eer: None,
        semantic: None,
        readability: None,
        window_wer_min: None,
        window_wer_max: None,
        unmatched_speech_words: None,
        notes: Vec::new(),
    };

    if m.wer {
        let rw = normalize_words(&reference_words(&reference), &spec.wer_norm);
        let hw = normalize_words(&hyp.transcript.words(), &spec.wer_norm);
        let texts = |ws: &[TimedWord]| ws.iter().map(|w| w.text().to_string()).collect::<Vec<_>>();
        match wer(&texts(&rw), &texts(&hw)) {
            Ok(b) => row.wer = Some(b.wer),
            Err(e) => row.notes.push(format!("wer: {e}")),
        }
        let w = windowed_wer(&rw, &hw, m.window_s);
        row.window_wer_min = w.min_wer();
        row.window_wer_max = w.max_wer();
        row.unmatched_speech_words = Some(w.unmatched_speech_words);
    }
    match &hyp.subtitles {
        Ok(subs) => {
            if m.suber {
                match suber_with(&reference, subs, &spec.suber) {
                    Ok(s) => row.suber = Some(s.score),
                    Err(e) => row.notes.push(format!("suber: {e}")),
                }
            }
            if m.readability {
                match readability(subs, &spec.readability) {
                    Ok(r) => row.readability = Some(r.rates),
                    Err(e) => row.notes.push(format!("readability: {e}")),
                }
            }
        }
        Err(e) if m.suber || m.readability => row.notes.push(e.clone()),
        Err(_) => {}
    }
    if m.eer {
        if let Some(p) = &ep.entities {
            let p = spec.resolve(p);
            let ents = load_entities(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            let ents: Vec<_> =
                ents.into_iter().filter(|e| e.episode_id.as_deref().is_none_or(|id| id == ep.episode_id)).collect();
            match eer(&ents, &hyp.transcript, &spec.eer) {
                Ok(r) => row.eer = Some(r.eer),
                Err(e) => row.notes.push(format!("eer: {e}")),
            }
        }
    }
    if m.semantic {
        let rs = split_sentences(&reference.full_text());
        let hs = split_sentences(&hyp.transcript.full_text());
        match semantic_report(&rs, &hs, &align_sentences(&rs, &hs), scorer) {
            Ok(r) => row.semantic = Some(r.mean),
            Err(e) => row.notes.push(format!("semantic: {e}")),
        }
    }
    Ok(row)
}

/// Evaluates every (episode, model) pair. Rows follow manifest episode
/// order, then model id order; a failing pair becomes an error record.
pub fn run_corpus(spec: &CorpusRunSpec, scorer: &dyn SemanticScorer) -> Result<MetricsReport, HarnessError> {
    spec.validate()?;
    let tasks: Vec<(&EpisodeSpec, &String, &PathBuf)> =
        spec.episodes.iter().flat_map(|ep| ep.hypotheses.iter().map(move |(m, p)| (ep, m, p))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = spec.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| HarnessError::SpecInvalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<MetricsRow, RowError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ep, model, path)| {
                evaluate_pair(spec, ep, model, path, scorer).map_err(|message| RowError {
                    episode_id: ep.episode_id.clone(),
                    model_id: model.clone(),
                    message,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("{} / {}: {}", e.episode_id, e.model_id, e.message);
                errors.push(e);
            }
        }
    }
    let aggregates = aggregate(&rows);
    Ok(MetricsReport { rows, errors, aggregates })
}
