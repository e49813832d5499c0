use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::align::{similarity, SentencePairing};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scorer failed: {0}")]
pub struct ScorerError(pub String);

/// Sentence-level semantic similarity in `[min_score, max_score]`.
pub trait SemanticScorer: Send + Sync {
    fn score(&self, reference: &str, hypothesis: &str) -> Result<f64, ScorerError>;

    /// Scores many pairs; remote scorers override this to batch requests.
    fn score_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ScorerError> {
        pairs.iter().map(|(r, h)| self.score(r, h)).collect()
    }

    fn min_score(&self) -> f64 {
        0.0
    }

    fn max_score(&self) -> f64 {
        1.0
    }
}

/// Character-level Levenshtein ratio; dependency-free default.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl SemanticScorer for LexicalScorer {
    fn score(&self, reference: &str, hypothesis: &str) -> Result<f64, ScorerError> {
        Ok(similarity(reference, hypothesis))
    }
}

/// Client for a remote scoring service (e.g. a BLEURT server).
///
/// Request: `POST {endpoint}` with `{"pairs": [{"ref": ..., "hyp": ...}]}`.
/// Response: `{"scores": [f64, ...]}`, one unit-interval score per pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteScorerConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

pub struct RemoteScorer {
    cfg: RemoteScorerConfig,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(cfg: RemoteScorerConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        RemoteScorer { cfg, agent }
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    #[serde(rename = "ref")]
    reference: &'a str,
    hyp: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<f64>,
}

impl SemanticScorer for RemoteScorer {
    fn score(&self, reference: &str, hypothesis: &str) -> Result<f64, ScorerError> {
        Ok(self.score_batch(&[(reference, hypothesis)])?[0])
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ScorerError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let body = WireRequest { pairs: pairs.iter().map(|&(r, h)| WirePair { reference: r, hyp: h }).collect() };
        let resp: WireResponse = self
            .agent
            .post(&self.cfg.endpoint)
            .send_json(&body)
            .map_err(|e| ScorerError(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| ScorerError(e.to_string()))?;
        if resp.scores.len() != pairs.len() {
            return Err(ScorerError(format!("expected {} scores, got {}", pairs.len(), resp.scores.len())));
        }
        if let Some(bad) = resp.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(ScorerError(format!("score {bad} outside [0, 1]")));
        }
        Ok(resp.scores)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub reference: usize,
    pub hypothesis: Option<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    /// One entry per reference sentence, in order.
    pub scores: Vec<PairScore>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scoring reference sentence {reference} against hypothesis sentence {hypothesis}: {source}")]
pub struct SemanticError {
    pub reference: usize,
    pub hypothesis: usize,
    pub source: ScorerError,
}

/// Scores every paired sentence; unpaired reference sentences receive the
/// scorer's minimum. The mean runs over reference sentences.
pub fn semantic_report(
    reference: &[String],
    hypothesis: &[String],
    pairing: &SentencePairing,
    scorer: &dyn SemanticScorer,
) -> Result<SemanticReport, SemanticError> {
    let inputs: Vec<(&str, &str)> =
        pairing.pairs.iter().map(|p| (reference[p.reference].as_str(), hypothesis[p.hypothesis].as_str())).collect();
    let scored = scorer.score_batch(&inputs).map_err(|source| {
        let first = pairing.pairs.first();
        SemanticError {
            reference: first.map_or(0, |p| p.reference),
            hypothesis: first.map_or(0, |p| p.hypothesis),
            source,
        }
    });
    let values = match scored {
        Ok(v) => v,
        // Retry pair by pair to report which pair failed.
        Err(batch_err) => {
            let mut v = Vec::with_capacity(inputs.len());
            for (p, (r, h)) in pairing.pairs.iter().zip(&inputs) {
                v.push(scorer.score(r, h).map_err(|source| SemanticError {
                    reference: p.reference,
                    hypothesis: p.hypothesis,
                    source,
                })?);
            }
            if v.len() != inputs.len() {
                return Err(batch_err);
            }
            v
        }
    };
    let mut scores: Vec<PairScore> = pairing
        .pairs
        .iter()
        .zip(values)
        .map(|(p, score)| PairScore { reference: p.reference, hypothesis: Some(p.hypothesis), score })
        .chain(pairing.unpaired_ref.iter().map(|&r| PairScore { reference: r, hypothesis: None, score: scorer.min_score() }))
        .collect();
    scores.sort_by_key(|s| s.reference);
    let mean = if scores.is_empty() { 0.0 } else { scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64 };
    Ok(SemanticReport { scores, mean })
}
