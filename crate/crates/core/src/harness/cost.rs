use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtfxStat {
    pub audio_duration_s: f64,
    pub processing_duration_s: f64,
    /// Seconds of audio processed per second of compute.
    pub rtfx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    /// Billed by machine time, e.g. a rented GPU.
    PerComputeHour,
    /// Billed by input audio length, e.g. a hosted API.
    PerAudioHour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub kind: CostKind,
    pub rate_usd_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("durations must be positive (audio {audio_s} s, processing {processing_s} s)")]
    NonPositiveDuration { audio_s: f64, processing_s: f64 },
    #[error("audio duration must be non-negative, got {0} s")]
    NegativeAudio(f64),
    #[error("rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("compute-hour pricing needs an RTFx measurement")]
    MissingRtfx,
}

pub fn rtfx(audio_s: f64, processing_s: f64) -> Result<RtfxStat, CostError> {
    // `!(x > 0)` also rejects NaN.
    if !(audio_s > 0.0 && processing_s > 0.0) || !audio_s.is_finite() || !processing_s.is_finite() {
        return Err(CostError::NonPositiveDuration { audio_s, processing_s });
    }
    Ok(RtfxStat { audio_duration_s: audio_s, processing_duration_s: processing_s, rtfx: audio_s / processing_s })
}

impl CostModel {
    pub fn new(kind: CostKind, rate_usd_per_hour: f64) -> Result<Self, CostError> {
        if !(rate_usd_per_hour > 0.0) || !rate_usd_per_hour.is_finite() {
            return Err(CostError::InvalidRate(rate_usd_per_hour));
        }
        Ok(CostModel { kind, rate_usd_per_hour })
    }
}

/// USD to transcribe `audio_s` seconds of audio.
///
/// Compute-hour pricing divides audio time by the RTFx, so it covers
/// inference only: no model loading, queueing or idle time.
pub fn cost(audio_s: f64, stats: Option<&RtfxStat>, model: &CostModel) -> Result<f64, CostError> {
    if !(audio_s >= 0.0) {
        return Err(CostError::NegativeAudio(audio_s));
    }
    let hours = audio_s / 3600.0;
    match model.kind {
        CostKind::PerAudioHour => Ok(hours * model.rate_usd_per_hour),
        CostKind::PerComputeHour => {
            let s = stats.ok_or(CostError::MissingRtfx)?;
            Ok(hours / s.rtfx * model.rate_usd_per_hour)
        }
    }
}
