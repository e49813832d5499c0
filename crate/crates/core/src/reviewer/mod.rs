//! LLM post-editing of subtitle text.
//!
//! Cues are sent in batches; a provider must return exactly one text per
//! cue. A response with the wrong count is retried once, then the batch is
//! bisected down to single cues. A single cue that still fails keeps its
//! original text and is flagged. Revised texts are laid out again and
//! rejected when they would break a hard readability limit.

mod audit;
mod provider;
mod stats;

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::metrics::{measure_cue, ReadabilityLimits, Violation};
use crate::model::{Cue, SubtitleFile};
use crate::segmenter::split_lines;

pub use audit::{AuditLog, AuditOutcome, AuditRecord};
pub use provider::{
    HttpProvider, HttpProviderConfig, MockFault, MockProvider, ProviderConfigError, ProviderError, ReviewRequest,
    ReviewerProvider,
};
pub use stats::{paired_significance, Alternative, PairedTestResult, StatsError, EXACT_MAX_N};

pub const MAX_BATCH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReviewMode {
    EntityCorrection,
    PunctuationRestoration,
}

impl ReviewMode {
    pub fn label(self) -> &'static str {
        match self {
            ReviewMode::EntityCorrection => "entities",
            ReviewMode::PunctuationRestoration => "punctuation",
        }
    }

    fn template(self) -> &'static str {
        match self {
            ReviewMode::EntityCorrection => include_str!("../../assets/prompts/entity_correction.v1.txt"),
            ReviewMode::PunctuationRestoration => include_str!("../../assets/prompts/punctuation_restoration.v1.txt"),
        }
    }

    /// Prompt for `count` cues with optional domain hints.
    pub fn prompt(self, count: usize, context: Option<&str>) -> String {
        let context = match context {
            Some(c) if !c.trim().is_empty() => format!("Context:\n{}\n", c.trim()),
            _ => String::new(),
        };
        self.template().replace("{count}", &count.to_string()).replace("{context}", &context)
    }
}

impl FromStr for ReviewMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entities" | "entity" | "EntityCorrection" => Ok(ReviewMode::EntityCorrection),
            "punctuation" | "PunctuationRestoration" => Ok(ReviewMode::PunctuationRestoration),
            other => Err(format!("unknown review mode `{other}` (expected entities or punctuation)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBatch {
    pub batch_id: usize,
    /// Position of the first cue in the file.
    pub first_cue: usize,
    pub cue_texts: Vec<String>,
    pub mode: ReviewMode,
    pub context: Option<String>,
}

/// Splits a file into consecutive batches of at most `max_batch` cues.
pub fn build_batches(file: &SubtitleFile, max_batch: usize, mode: ReviewMode, context: Option<&str>) -> Vec<ReviewBatch> {
    let max_batch = max_batch.clamp(1, MAX_BATCH);
    file.cues()
        .chunks(max_batch)
        .enumerate()
        .map(|(b, chunk)| ReviewBatch {
            batch_id: b,
            first_cue: b * max_batch,
            cue_texts: chunk.iter().map(Cue::text).collect(),
            mode,
            context: context.map(str::to_string),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagReason {
    /// The provider never returned a usable text for this cue.
    ContractViolation,
    /// The revision would introduce this hard readability violation.
    HardLimit(Violation),
    /// The revision cannot be laid out in two lines.
    Layout,
    EmptyRevision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueFlag {
    /// Cue position in the file.
    pub cue: usize,
    pub reason: FlagReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewResult {
    pub batch_id: usize,
    pub first_cue: usize,
    pub revised_texts: Vec<String>,
    pub provider_id: String,
    pub latency_ms: u64,
    pub calls: usize,
    pub flags: Vec<CueFlag>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("provider {provider} unreachable: {message}")]
    ProviderUnreachable { provider: String, message: String },
    #[error("provider {0} does not accept batches")]
    BatchUnsupported(String),
    #[error("batch {batch_id} is invalid: {reason}")]
    InvalidBatch { batch_id: usize, reason: String },
    #[error("expected {expected} revised texts, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("writing audit log: {0}")]
    Audit(#[from] std::io::Error),
}

struct BatchRun<'a> {
    provider: &'a dyn ReviewerProvider,
    batch: &'a ReviewBatch,
    audit: Option<&'a AuditLog>,
    calls: usize,
    flags: Vec<CueFlag>,
}

impl BatchRun<'_> {
    /// One provider call over `batch.cue_texts[lo..hi]`; `None` on a count
    /// or payload violation.
    fn call(&mut self, lo: usize, hi: usize) -> Result<Option<Vec<String>>, ReviewError> {
        let texts = self.batch.cue_texts[lo..hi].to_vec();
        let request = ReviewRequest {
            mode: self.batch.mode,
            prompt: self.batch.mode.prompt(texts.len(), self.batch.context.as_deref()),
            texts,
        };
        self.calls += 1;
        let response = self.provider.review(&request);
        let outcome = match &response {
            Ok(out) if out.len() == hi - lo => AuditOutcome::Ok,
            Ok(_) | Err(ProviderError::Malformed(_)) => AuditOutcome::ContractViolation,
            Err(ProviderError::Transport(_)) => AuditOutcome::TransportError,
        };
        if let Some(log) = self.audit {
            let id = format!("{}:{}-{}", self.batch.batch_id, self.batch.first_cue + lo, self.batch.first_cue + hi);
            log.record(&id, self.batch.mode, &request, &response, outcome)?;
        }
        let result = match (response, outcome) {
            (Ok(out), AuditOutcome::Ok) => Ok(Some(out)),
            (Err(ProviderError::Transport(message)), _) => {
                Err(ReviewError::ProviderUnreachable { provider: self.provider.id().to_string(), message })
            }
            _ => Ok(None),
        };
        result
    }

    /// Call, retry once, then bisect.
    fn solve(&mut self, lo: usize, hi: usize) -> Result<Vec<String>, ReviewError> {
        for _ in 0..2 {
            if let Some(out) = self.call(lo, hi)? {
                return Ok(out);
            }
        }
        if hi - lo == 1 {
            self.flags.push(CueFlag { cue: self.batch.first_cue + lo, reason: FlagReason::ContractViolation });
            return Ok(vec![self.batch.cue_texts[lo].clone()]);
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let mut out = self.solve(lo, mid)?;
        out.extend(self.solve(mid, hi)?);
        Ok(out)
    }
}

/// Reviews one batch with count validation and fallback.
pub fn review_batch(
    provider: &dyn ReviewerProvider,
    batch: &ReviewBatch,
    audit: Option<&AuditLog>,
) -> Result<ReviewResult, ReviewError> {
    if batch.cue_texts.is_empty() || batch.cue_texts.len() > MAX_BATCH {
        return Err(ReviewError::InvalidBatch { batch_id: batch.batch_id, reason: format!("{} cues", batch.cue_texts.len()) });
    }
    if batch.cue_texts.iter().any(|t| t.trim().is_empty()) {
        return Err(ReviewError::InvalidBatch { batch_id: batch.batch_id, reason: "empty cue text".into() });
    }
    if batch.cue_texts.len() > 1 && !provider.supports_batch() {
        return Err(ReviewError::BatchUnsupported(provider.id().to_string()));
    }
    let started = Instant::now();
    let mut run = BatchRun { provider, batch, audit, calls: 0, flags: Vec::new() };
    let revised_texts = run.solve(0, batch.cue_texts.len())?;
    Ok(ReviewResult {
        batch_id: batch.batch_id,
        first_cue: batch.first_cue,
        revised_texts,
        provider_id: provider.id().to_string(),
        latency_ms: started.elapsed().as_millis() as u64,
        calls: run.calls,
        flags: run.flags,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewOptions {
    pub max_batch: usize,
    pub parallelism: usize,
    pub context: Option<String>,
}

impl Default for ReviewOptions {
    fn default() -> Self {
        ReviewOptions { max_batch: MAX_BATCH, parallelism: 4, context: None }
    }
}

/// Reviews every cue of `file`, several batches in flight at once.
/// Results come back in batch order.
pub fn review_file(
    provider: &dyn ReviewerProvider,
    file: &SubtitleFile,
    mode: ReviewMode,
    opts: &ReviewOptions,
    audit: Option<&AuditLog>,
) -> Result<Vec<ReviewResult>, ReviewError> {
    let max_batch = if provider.supports_batch() { opts.max_batch } else { 1 };
    let batches = build_batches(file, max_batch, mode, opts.context.as_deref());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ReviewResult, ReviewError>>>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let workers = opts.parallelism.clamp(1, batches.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(i) else { break };
                let r = review_batch(provider, batch, audit);
                let failed = r.is_err();
                slots.lock().expect("result slots poisoned")[i] = Some(r);
                if failed {
                    // Stop handing out new work; in-flight batches finish.
                    next.store(batches.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(batches.len());
    for slot in slots.into_inner().expect("result slots poisoned") {
        match slot {
            Some(r) => out.push(r?),
            None => continue,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewedFile {
    pub file: SubtitleFile,
    pub flags: Vec<CueFlag>,
    pub changed: usize,
}

/// Replaces cue texts with reviewed ones. Indices and timings never change;
/// a revision that cannot be laid out or that adds a hard readability
/// violation is rejected and the cue flagged.
pub fn apply_review(
    file: &SubtitleFile,
    results: &[ReviewResult],
    limits: &ReadabilityLimits,
    max_line_chars: usize,
) -> Result<ReviewedFile, ReviewError> {
    let mut ordered: Vec<&ReviewResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.first_cue);
    let mut texts = Vec::with_capacity(file.len());
    let mut flags = Vec::new();
    for r in ordered {
        if r.first_cue != texts.len() {
            return Err(ReviewError::CountMismatch { expected: file.len(), got: texts.len() });
        }
        texts.extend(r.revised_texts.iter().cloned());
        flags.extend(r.flags.iter().copied());
    }
    if texts.len() != file.len() {
        return Err(ReviewError::CountMismatch { expected: file.len(), got: texts.len() });
    }

    let mut changed = 0;
    let mut cues = Vec::with_capacity(file.len());
    for (pos, (cue, revised)) in file.cues().iter().zip(&texts).enumerate() {
        let revised = revised.split_whitespace().collect::<Vec<_>>().join(" ");
        if revised == cue.text() {
            cues.push(cue.clone());
            continue;
        }
        match revise_cue(cue, &revised, limits, max_line_chars) {
            Ok(c) => {
                changed += 1;
                cues.push(c);
            }
            Err(reason) => {
                flags.push(CueFlag { cue: pos, reason });
                cues.push(cue.clone());
            }
        }
    }
    flags.sort_by_key(|f| f.cue);
    Ok(ReviewedFile { file: file.map_cues(cues), flags, changed })
}

fn revise_cue(cue: &Cue, text: &str, limits: &ReadabilityLimits, max_line_chars: usize) -> Result<Cue, FlagReason> {
    if text.is_empty() {
        return Err(FlagReason::EmptyRevision);
    }
    let lines = split_lines(text, max_line_chars).map_err(|_| FlagReason::Layout)?;
    let new = cue.with_lines(lines).map_err(|_| FlagReason::Layout)?;
    // Durations are unchanged and positive, so measuring cannot fail.
    let before = measure_cue(cue, limits).map(|m| m.violations).unwrap_or_default();
    let after = measure_cue(&new, limits).map(|m| m.violations).unwrap_or_default();
    match after.into_iter().find(|v| v.is_hard() && !before.contains(v)) {
        Some(v) => Err(FlagReason::HardLimit(v)),
        None => Ok(new),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeCode;

    fn file(n: usize) -> SubtitleFile {
        SubtitleFile::from_parts((0..n).map(|i| {
            let s = i as u64 * 3000;
            (TimeCode::from_millis(s), TimeCode::from_millis(s + 2500), vec![format!("sottotitolo numero {i}")])
        }))
        .unwrap()
    }

    #[test]
    fn batch_sizes() {
        let sizes = |n| build_batches(&file(n), 40, ReviewMode::EntityCorrection, None).iter().map(|b| b.cue_texts.len()).collect::<Vec<_>>();
        assert_eq!(sizes(100), vec![40, 40, 20]);
        assert_eq!(sizes(40), vec![40]);
        assert!(sizes(0).is_empty());
    }

    #[test]
    fn prompt_states_count() {
        let p = ReviewMode::PunctuationRestoration.prompt(7, Some("Calabria"));
        assert!(p.contains("exactly 7 strings"));
        assert!(p.contains("Context:\nCalabria"));
        assert!(!ReviewMode::EntityCorrection.prompt(1, None).contains("{context}"));
    }

    #[test]
    fn echo_keeps_texts() {
        let f = file(5);
        let b = &build_batches(&f, 40, ReviewMode::EntityCorrection, None)[0];
        let r = review_batch(&MockProvider::echo(), b, None).unwrap();
        assert_eq!(r.revised_texts, b.cue_texts);
        assert_eq!(r.calls, 1);
    }

    #[test]
    fn wrong_count_on_every_call_bisects_to_singletons() {
        let f = file(40);
        let b = &build_batches(&f, 40, ReviewMode::EntityCorrection, None)[0];
        let p = MockProvider::echo().with_fault(MockFault::AlwaysWrongCount);
        let r = review_batch(&p, b, None).unwrap();
        assert_eq!(r.revised_texts, b.cue_texts);
        assert_eq!(r.flags.len(), 40);
        // Two attempts at every node of a binary tree with 40 leaves.
        assert_eq!(r.calls, 2 * (2 * 40 - 1));
    }

    #[test]
    fn wrong_count_once_then_splits() {
        let f = file(40);
        let b = &build_batches(&f, 40, ReviewMode::EntityCorrection, None)[0];
        let p = MockProvider::echo().with_fault(MockFault::WrongCountOnce);
        let r = review_batch(&p, b, None).unwrap();
        assert_eq!(r.calls, 2);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn transport_failure_surfaces() {
        let f = file(3);
        let p = MockProvider::echo().with_fault(MockFault::Unreachable);
        let err = review_file(&p, &f, ReviewMode::EntityCorrection, &ReviewOptions::default(), None).unwrap_err();
        assert!(matches!(err, ReviewError::ProviderUnreachable { .. }));
    }

    #[test]
    fn apply_identity_and_single_change() {
        let f = file(3);
        let limits = ReadabilityLimits::default();
        let p = MockProvider::echo();
        let res = review_file(&p, &f, ReviewMode::EntityCorrection, &ReviewOptions::default(), None).unwrap();
        assert_eq!(apply_review(&f, &res, &limits, 37).unwrap().file, f);

        let p = MockProvider::with_substitutions([("numero 1", "numero uno")]);
        let res = review_file(&p, &f, ReviewMode::EntityCorrection, &ReviewOptions::default(), None).unwrap();
        let out = apply_review(&f, &res, &limits, 37).unwrap();
        assert_eq!(out.changed, 1);
        assert_eq!(out.file.cues()[1].text(), "sottotitolo numero uno");
        assert_eq!(out.file.cues()[1].start(), f.cues()[1].start());
    }

    #[test]
    fn long_revision_is_rewrapped_or_rejected() {
        let f = SubtitleFile::from_parts((0..2).map(|i| {
            let s = i as u64 * 6000;
            (TimeCode::from_millis(s), TimeCode::from_millis(s + 5000), vec![format!("sottotitolo numero {i}")])
        }))
        .unwrap();
        let limits = ReadabilityLimits::default();
        let longer = "sottotitolo numero zero con qualche parola in più";
        let p = MockProvider::with_substitutions([("sottotitolo numero 0", longer)]);
        let res = review_file(&p, &f, ReviewMode::PunctuationRestoration, &ReviewOptions::default(), None).unwrap();
        let out = apply_review(&f, &res, &limits, 37).unwrap();
        assert_eq!(out.file.cues()[0].lines().len(), 2);
        assert!(out.flags.is_empty());

        let huge = "parola ".repeat(12);
        let p = MockProvider::with_substitutions([("sottotitolo numero 1", huge.trim())]);
        let res = review_file(&p, &f, ReviewMode::PunctuationRestoration, &ReviewOptions::default(), None).unwrap();
        let out = apply_review(&f, &res, &limits, 37).unwrap();
        assert_eq!(out.file.cues()[1], f.cues()[1]);
        assert_eq!(out.flags.len(), 1);
    }

    #[test]
    fn apply_rejects_wrong_total() {
        let f = file(3);
        let r = ReviewResult { batch_id: 0, first_cue: 0, revised_texts: vec!["a".into()], provider_id: "x".into(), latency_ms: 0, calls: 1, flags: vec![] };
        assert!(matches!(apply_review(&f, &[r], &ReadabilityLimits::default(), 37), Err(ReviewError::CountMismatch { expected: 3, got: 1 })));
    }
}
