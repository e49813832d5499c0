//! Entity error rate.
//!
//! Reference entities come from an external NER pass as line-delimited JSON:
//!
//! ```text
//! {"surface": "Vibo Valentia", "category": "Location", "anchor_s": 93.2, "episode_id": "ep07"}
//! ```
//!
//! `category` accepts `Person`/`PER`, `Organization`/`ORG` and
//! `Location`/`LOC`/`GPE`; anything else is rejected. `span: [start, end]`
//! (word indices in the source) is optional.
//!
//! Each reference entity is looked up in the hypothesis among word n-grams
//! whose first word's midpoint lies within `±window_ms` of the entity
//! anchor. The most similar candidate wins; it is `Correct` when its
//! normalized surface equals the reference, `Incorrect` when it differs but
//! reaches the similarity threshold, and the entity is `Missing` otherwise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::align::{is_apostrophe, normalize, similarity, NormSpec};
use crate::model::{TimeCode, TimedWord, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityCategory {
    Person,
    Organization,
    Location,
}

impl EntityCategory {
    pub fn parse(label: &str) -> Option<Self> {
        match label.trim().to_ascii_uppercase().as_str() {
            "PERSON" | "PER" => Some(EntityCategory::Person),
            "ORGANIZATION" | "ORGANISATION" | "ORG" => Some(EntityCategory::Organization),
            "LOCATION" | "LOC" | "GPE" => Some(EntityCategory::Location),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub surface: String,
    pub category: EntityCategory,
    pub anchor: TimeCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_id: Option<String>,
}

impl EntityRecord {
    pub fn new(surface: impl Into<String>, category: EntityCategory, anchor: TimeCode) -> Self {
        EntityRecord { surface: surface.into(), category, anchor, span: None, episode_id: None }
    }

    /// Length in entity tokens (elisions split as in the hypothesis).
    pub fn token_count(&self) -> usize {
        self.surface.split_whitespace().map(|w| split_elisions(w).len()).sum::<usize>().max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntityError {
    #[error("line {line}: unknown entity category `{value}`")]
    UnknownCategory { line: usize, value: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("no reference entities to score")]
    EmptyEntityList,
}

/// Parses entity annotations; records come back sorted by anchor (stable).
pub fn load_entities(raw: &[u8]) -> Result<Vec<EntityRecord>, EntityError> {
    let text = String::from_utf8_lossy(raw);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let invalid = |reason: String| EntityError::InvalidRecord { line: line_no, reason };
        let v: Value = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| invalid("expected a JSON object".into()))?;
        let get = |field: &'static str| obj.get(field).ok_or(EntityError::MissingField { line: line_no, field });

        let surface = get("surface")?.as_str().ok_or_else(|| invalid("`surface` must be a string".into()))?.trim();
        if surface.is_empty() {
            return Err(invalid("`surface` is empty".into()));
        }
        let label = get("category")?.as_str().ok_or_else(|| invalid("`category` must be a string".into()))?;
        let category = EntityCategory::parse(label)
            .ok_or_else(|| EntityError::UnknownCategory { line: line_no, value: label.to_string() })?;
        let anchor_s = get("anchor_s")?.as_f64().ok_or_else(|| invalid("`anchor_s` must be a number".into()))?;
        let anchor = TimeCode::from_seconds(anchor_s).ok_or_else(|| invalid(format!("invalid anchor {anchor_s}")))?;
        let episode_id = match obj.get("episode_id") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(invalid("`episode_id` must be a string".into())),
        };
        let span = match obj.get("span") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let pair: (usize, usize) =
                    serde_json::from_value(v.clone()).map_err(|_| invalid("`span` must be [start, end]".into()))?;
                Some(pair)
            }
        };
        out.push(EntityRecord { surface: surface.to_string(), category, anchor, span, episode_id });
    }
    out.sort_by_key(|r| r.anchor);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EerConfig {
    pub window_ms: u64,
    pub similarity_threshold: f64,
    pub norm: NormSpec,
    /// When set, a reference surface with a leading apostrophe
    /// (`'ndrangheta`) only counts as correct if the hypothesis keeps it.
    pub strict_leading_apostrophe: bool,
}

impl Default for EerConfig {
    fn default() -> Self {
        EerConfig { window_ms: 5000, similarity_threshold: 0.5, norm: NormSpec::METRIC_DEFAULT, strict_leading_apostrophe: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    Incorrect,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Index of the first token in the hypothesis entity-token stream.
    pub first_token: usize,
    pub width: usize,
    pub text: String,
    pub similarity: f64,
    pub time_offset_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub reference: EntityRecord,
    pub candidate: Option<Candidate>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub missing: usize,
}

impl VerdictCounts {
    fn add(&mut self, v: Verdict) {
        self.total += 1;
        match v {
            Verdict::Correct => self.correct += 1,
            Verdict::Incorrect => self.incorrect += 1,
            Verdict::Missing => self.missing += 1,
        }
    }

    pub fn error_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.incorrect + self.missing) as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub matches: Vec<EntityMatch>,
    pub eer: f64,
    pub totals: VerdictCounts,
    pub per_category: BTreeMap<EntityCategory, VerdictCounts>,
}

/// Splits a word after each elision apostrophe: `dell'Andrangheta` gives
/// `dell'` and `Andrangheta`, `dell''ndrangheta` gives `dell'` and `'ndrangheta`.
pub fn split_elisions(word: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut out = Vec::new();
    let mut begin = 0;
    for i in 1..chars.len().saturating_sub(1) {
        let elision = is_apostrophe(chars[i].1)
            && chars[i - 1].1.is_alphabetic()
            && (chars[i + 1].1.is_alphabetic() || is_apostrophe(chars[i + 1].1));
        if elision {
            let cut = chars[i + 1].0;
            out.push(&word[begin..cut]);
            begin = cut;
        }
    }
    out.push(&word[begin..]);
    out
}

/// Hypothesis tokens for entity lookup: transcript words passed through
/// [`split_elisions`]. Pieces share the timing of their word.
pub fn entity_tokens(hyp: &Transcript) -> Vec<TimedWord> {
    hyp.words().iter().flat_map(|w| split_elisions(w.text()).into_iter().map(|p| w.with_text(p))).collect()
}

fn join_tokens(tokens: &[TimedWord]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && !s.chars().last().is_some_and(is_apostrophe) {
            s.push(' ');
        }
        s.push_str(t.text());
    }
    s
}

fn trim_edges(s: &str) -> &str {
    s.trim_matches(|c: char| !c.is_alphanumeric() && !is_apostrophe(c))
}

fn leading_apostrophe(s: &str) -> bool {
    trim_edges(s).chars().next().is_some_and(is_apostrophe)
}

fn surfaces_equal(reference: &str, candidate: &str, cfg: &EerConfig) -> bool {
    if normalize(reference, &cfg.norm) != normalize(candidate, &cfg.norm) {
        return false;
    }
    !cfg.strict_leading_apostrophe || !leading_apostrophe(reference) || leading_apostrophe(candidate)
}

/// Matches one reference entity against pre-split hypothesis tokens.
pub fn match_entity_tokens(reference: &EntityRecord, tokens: &[TimedWord], cfg: &EerConfig) -> EntityMatch {
    let n = reference.token_count();
    let anchor = reference.anchor.millis();
    let lo = anchor.saturating_sub(cfg.window_ms);
    let hi = anchor + cfg.window_ms;
    let target = trim_edges(&reference.surface);

    let mut best: Option<Candidate> = None;
    for (k, first) in tokens.iter().enumerate() {
        let mid = first.midpoint_ms();
        if mid < lo || mid > hi {
            continue;
        }
        for width in n.saturating_sub(1).max(1)..=n + 1 {
            if k + width > tokens.len() {
                break;
            }
            let text = join_tokens(&tokens[k..k + width]);
            let cand = Candidate {
                first_token: k,
                width,
                similarity: similarity(target, trim_edges(&text)),
                text,
                time_offset_ms: mid.abs_diff(anchor),
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    cand.similarity > b.similarity
                        || (cand.similarity == b.similarity && cand.time_offset_ms < b.time_offset_ms)
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (candidate, verdict) = match best {
        Some(c) if c.similarity >= cfg.similarity_threshold => {
            let v = if surfaces_equal(&reference.surface, &c.text, cfg) { Verdict::Correct } else { Verdict::Incorrect };
            (Some(c), v)
        }
        _ => (None, Verdict::Missing),
    };
    EntityMatch { reference: reference.clone(), candidate, verdict }
}

pub fn match_entity(reference: &EntityRecord, hyp: &Transcript, cfg: &EerConfig) -> EntityMatch {
    match_entity_tokens(reference, &entity_tokens(hyp), cfg)
}

/// Scores every reference entity occurrence independently.
pub fn eer(references: &[EntityRecord], hyp: &Transcript, cfg: &EerConfig) -> Result<EerResult, EntityError> {
    if references.is_empty() {
        return Err(EntityError::EmptyEntityList);
    }
    let tokens = entity_tokens(hyp);
    let matches: Vec<EntityMatch> = references.iter().map(|r| match_entity_tokens(r, &tokens, cfg)).collect();
    let mut totals = VerdictCounts::default();
    let mut per_category: BTreeMap<EntityCategory, VerdictCounts> = BTreeMap::new();
    for m in &matches {
        totals.add(m.verdict);
        per_category.entry(m.reference.category).or_default().add(m.verdict);
    }
    Ok(EerResult { eer: totals.error_rate(), matches, totals, per_category })
}
