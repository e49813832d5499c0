//! Job executors. Each job writes only into its own artifact directory, so
//! running a job twice after a redelivery overwrites rather than duplicates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use subqa_core::harness::{emit_report, run_corpus, CorpusRunSpec, EpisodeSpec, MetricToggles, ReportFormat, Typology, REVIEWED_SUFFIX};
use subqa_core::metrics::LexicalScorer;
use subqa_core::model::{emit_srt, parse_srt, parse_transcript, SubtitleFile};
use subqa_core::reviewer::{
    apply_review, review_file, AuditLog, HttpProvider, HttpProviderConfig, MockProvider, ReviewMode, ReviewOptions,
    ReviewedFile, ReviewerProvider,
};
use subqa_core::segmenter::{segment, SegmenterConfig};

use crate::Job;

/// Runs one job, writing outputs under `out_dir`. Returns artifact name to
/// path; an `Err` fails the job with that message.
pub trait Executor: Send + Sync {
    fn execute(&self, job: &Job, out_dir: &Path) -> Result<BTreeMap<String, String>, String>;
}

/// Reads a segmenter configuration from TOML, or JSON when the file ends
/// in `.json`. Missing fields keep their defaults.
pub fn load_segmenter_config(path: &Path) -> Result<SegmenterConfig, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    } else {
        toml::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// `mock` (offline echo) or `http` (configured endpoint).
pub fn make_provider(id: &str, config: Option<&Path>) -> Result<Box<dyn ReviewerProvider>, String> {
    match id {
        "mock" => Ok(Box::new(MockProvider::echo())),
        "http" => {
            let cfg = match config {
                Some(p) => HttpProviderConfig::load(p).map_err(|e| e.to_string())?,
                None => HttpProviderConfig::default(),
            };
            Ok(Box::new(HttpProvider::from_env(cfg).map_err(|e| e.to_string())?))
        }
        other => Err(format!("unknown provider `{other}` (expected mock or http)")),
    }
}

pub fn segment_transcript(path: &Path, cfg: &SegmenterConfig) -> Result<SubtitleFile, String> {
    let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let transcript = parse_transcript(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    segment(&transcript.words(), cfg).map_err(|e| format!("segmenting {}: {e}", path.display()))
}

/// Reviews a subtitle file and applies the accepted revisions.
pub fn review_subtitles(
    file: &SubtitleFile,
    mode: ReviewMode,
    provider: &dyn ReviewerProvider,
    audit: Option<&AuditLog>,
    cfg: &SegmenterConfig,
) -> Result<ReviewedFile, String> {
    let results = review_file(provider, file, mode, &ReviewOptions::default(), audit).map_err(|e| e.to_string())?;
    apply_review(file, &results, &cfg.limits, cfg.max_line_chars).map_err(|e| e.to_string())
}

fn write(path: &Path, bytes: &[u8]) -> Result<String, String> {
    std::fs::write(path, bytes).map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(path.display().to_string())
}

/// Segmentation, review and evaluation through the core library.
#[derive(Debug, Clone, Default)]
pub struct DefaultExecutor;

impl DefaultExecutor {
    fn segmenter_config(inputs: &BTreeMap<String, String>) -> Result<SegmenterConfig, String> {
        inputs.get("segmenter_config").map_or(Ok(SegmenterConfig::default()), |p| load_segmenter_config(Path::new(p)))
    }

    fn review_into(
        inputs: &BTreeMap<String, String>,
        file: &SubtitleFile,
        cfg: &SegmenterConfig,
        out_dir: &Path,
        artifacts: &mut BTreeMap<String, String>,
    ) -> Result<PathBuf, String> {
        let mode = ReviewMode::from_str(inputs.get("mode").map_or("entities", String::as_str))?;
        let provider = make_provider(
            inputs.get("provider").map_or("mock", String::as_str),
            inputs.get("provider_config").map(Path::new),
        )?;
        let audit_path = out_dir.join("audit.jsonl");
        // A redelivered job starts a fresh log.
        let _ = std::fs::remove_file(&audit_path);
        let audit = AuditLog::append_to(&audit_path).map_err(|e| format!("{}: {e}", audit_path.display()))?;
        let reviewed = review_subtitles(file, mode, provider.as_ref(), Some(&audit), cfg)?;
        let srt_path = out_dir.join("reviewed.srt");
        artifacts.insert("reviewed_srt".into(), write(&srt_path, &emit_srt(&reviewed.file))?);
        let flags = serde_json::json!({
            "changed": reviewed.changed,
            "flags": reviewed.flags.iter().map(|f| serde_json::json!({"cue": f.cue, "reason": format!("{:?}", f.reason)})).collect::<Vec<_>>(),
        });
        artifacts.insert("review_flags".into(), write(&out_dir.join("review_flags.json"), flags.to_string().as_bytes())?);
        if audit_path.is_file() {
            artifacts.insert("audit".into(), audit_path.display().to_string());
        }
        Ok(srt_path)
    }

    fn evaluate_into(spec: &CorpusRunSpec, out_dir: &Path, artifacts: &mut BTreeMap<String, String>) -> Result<(), String> {
        let report = run_corpus(spec, &LexicalScorer).map_err(|e| e.to_string())?;
        if report.rows.is_empty() {
            let why: Vec<String> = report.errors.iter().map(|e| format!("{}/{}: {}", e.episode_id, e.model_id, e.message)).collect();
            return Err(format!("no rows evaluated: {}", why.join("; ")));
        }
        let plots = out_dir.join("plots");
        std::fs::create_dir_all(&plots).map_err(|e| format!("{}: {e}", plots.display()))?;
        emit_report(&report, ReportFormat::Json, out_dir, None).map_err(|e| e.to_string())?;
        emit_report(&report, ReportFormat::Csv, out_dir, Some(&plots)).map_err(|e| e.to_string())?;
        for name in ["report.csv", "report.json", "aggregates.csv", "errors.csv"] {
            artifacts.insert(name.replace('.', "_"), out_dir.join(name).display().to_string());
        }
        Ok(())
    }
}

impl Executor for DefaultExecutor {
    fn execute(&self, job: &Job, out_dir: &Path) -> Result<BTreeMap<String, String>, String> {
        let inputs = &job.inputs;
        let input = |k: &str| inputs.get(k).map(PathBuf::from).ok_or_else(|| format!("missing input `{k}`"));
        let mut artifacts = BTreeMap::new();
        match job.kind {
            crate::JobKind::Segment => {
                let cfg = Self::segmenter_config(inputs)?;
                let file = segment_transcript(&input("transcript")?, &cfg)?;
                artifacts.insert("srt".into(), write(&out_dir.join("segmented.srt"), &emit_srt(&file))?);
            }
            crate::JobKind::Review => {
                let cfg = Self::segmenter_config(inputs)?;
                let path = input("srt")?;
                let raw = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let file = parse_srt(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
                Self::review_into(inputs, &file, &cfg, out_dir, &mut artifacts)?;
            }
            crate::JobKind::Evaluate => {
                let mut spec = CorpusRunSpec::load(&input("manifest")?).map_err(|e| e.to_string())?;
                if let Some(m) = inputs.get("metrics") {
                    let names: Vec<&str> = m.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                    spec.metrics = spec.metrics.only(&names)?;
                }
                Self::evaluate_into(&spec, out_dir, &mut artifacts)?;
            }
            crate::JobKind::FullPipeline => {
                let cfg = Self::segmenter_config(inputs)?;
                let transcript_path = input("transcript")?;
                let raw = std::fs::read(&transcript_path).map_err(|e| format!("{}: {e}", transcript_path.display()))?;
                let transcript = parse_transcript(&raw).map_err(|e| format!("{}: {e}", transcript_path.display()))?;
                let file = segment(&transcript.words(), &cfg).map_err(|e| format!("segmenting: {e}"))?;
                let segmented = out_dir.join("segmented.srt");
                artifacts.insert("srt".into(), write(&segmented, &emit_srt(&file))?);
                let reviewed = Self::review_into(inputs, &file, &cfg, out_dir, &mut artifacts)?;

                let typology: Typology = match inputs.get("typology") {
                    Some(t) => serde_json::from_value(serde_json::Value::String(t.clone())).map_err(|e| format!("typology: {e}"))?,
                    None => Typology::TalkShow,
                };
                let model = if transcript.model_id.is_empty() { "asr".to_string() } else { transcript.model_id.clone() };
                let duration = transcript.audio_duration.seconds();
                let spec = CorpusRunSpec {
                    episodes: vec![EpisodeSpec {
                        episode_id: inputs.get("episode_id").cloned().unwrap_or_else(|| if transcript.audio_id.trim().is_empty() { job.job_id.clone() } else { transcript.audio_id.clone() }),
                        typology,
                        reference: input("reference")?,
                        hypotheses: BTreeMap::from([(model.clone(), segmented), (format!("{model}{REVIEWED_SUFFIX}"), reviewed)]),
                        entities: inputs.get("entities").map(PathBuf::from),
                        audio_duration_s: if duration > 0.0 { duration } else { 1.0 },
                    }],
                    metrics: MetricToggles::default(),
                    eer: Default::default(),
                    segmenter: cfg,
                    suber: Default::default(),
                    readability: cfg.limits,
                    wer_norm: Default::default(),
                    jobs: Some(1),
                    base_dir: PathBuf::new(),
                };
                spec.validate().map_err(|e| e.to_string())?;
                Self::evaluate_into(&spec, out_dir, &mut artifacts)?;
            }
        }
        Ok(artifacts)
    }
}
