//! Broadcast readability: characters per segment (NCS), segment duration
//! (MSD) and characters per second (CPS).
//!
//! NCS counts every character of every line, spaces included, and excludes
//! line separators. Limits are inclusive: a cue at exactly 74 characters or
//! 15.0 CPS is compliant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::{Cue, SubtitleFile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadabilityLimits {
    pub ncs_min: usize,
    pub ncs_max: usize,
    pub msd_min: f64,
    pub msd_max: f64,
    pub cps_min: f64,
    pub cps_max: f64,
}

impl Default for ReadabilityLimits {
    fn default() -> Self {
        ReadabilityLimits { ncs_min: 30, ncs_max: 74, msd_min: 1.0, msd_max: 6.0, cps_min: 9.0, cps_max: 15.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Violation {
    NcsLow,
    NcsHigh,
    MsdLow,
    MsdHigh,
    CpsLow,
    CpsHigh,
}

impl Violation {
    pub const ALL: [Violation; 6] =
        [Violation::NcsLow, Violation::NcsHigh, Violation::MsdLow, Violation::MsdHigh, Violation::CpsLow, Violation::CpsHigh];

    /// Upper-bound violations; the segmenter never produces these.
    pub fn is_hard(self) -> bool {
        matches!(self, Violation::NcsHigh | Violation::MsdHigh | Violation::CpsHigh)
    }

    pub fn label(self) -> &'static str {
        match self {
            Violation::NcsLow => "ncs_low",
            Violation::NcsHigh => "ncs_high",
            Violation::MsdLow => "msd_low",
            Violation::MsdHigh => "msd_high",
            Violation::CpsLow => "cps_low",
            Violation::CpsHigh => "cps_high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueReadability {
    pub ncs: usize,
    pub msd: f64,
    pub cps: f64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    pub cues: Vec<CueReadability>,
    /// Fraction of cues carrying each violation.
    pub rates: BTreeMap<Violation, f64>,
}

impl ReadabilityReport {
    pub fn hard_violation_count(&self) -> usize {
        self.cues.iter().filter(|c| c.violations.iter().any(|v| v.is_hard())).count()
    }

    pub fn rate(&self, v: Violation) -> f64 {
        self.rates.get(&v).copied().unwrap_or(0.0)
    }
}

/// Pure threshold function over stored measurements.
pub fn classify(ncs: usize, msd: f64, cps: f64, limits: &ReadabilityLimits) -> Vec<Violation> {
    let mut v = Vec::new();
    if ncs < limits.ncs_min {
        v.push(Violation::NcsLow);
    }
    if ncs > limits.ncs_max {
        v.push(Violation::NcsHigh);
    }
    if msd < limits.msd_min {
        v.push(Violation::MsdLow);
    }
    if msd > limits.msd_max {
        v.push(Violation::MsdHigh);
    }
    if cps < limits.cps_min {
        v.push(Violation::CpsLow);
    }
    if cps > limits.cps_max {
        v.push(Violation::CpsHigh);
    }
    v
}

/// Character count of a cue as NCS defines it.
pub fn ncs_of_lines<S: AsRef<str>>(lines: &[S]) -> usize {
    lines.iter().map(|l| l.as_ref().chars().count()).sum()
}

pub fn cps_of(ncs: usize, duration_ms: u64) -> f64 {
    ncs as f64 * 1000.0 / duration_ms as f64
}

pub fn measure_cue(cue: &Cue, limits: &ReadabilityLimits) -> Result<CueReadability, MetricsError> {
    let dur = cue.duration_ms();
    if dur == 0 {
        return Err(MetricsError::ZeroDuration { index: cue.index() });
    }
    let ncs = ncs_of_lines(cue.lines());
    let msd = dur as f64 / 1000.0;
    let cps = cps_of(ncs, dur);
    Ok(CueReadability { ncs, msd, cps, violations: classify(ncs, msd, cps, limits) })
}

pub fn readability(file: &SubtitleFile, limits: &ReadabilityLimits) -> Result<ReadabilityReport, MetricsError> {
    let cues = file.cues().iter().map(|c| measure_cue(c, limits)).collect::<Result<Vec<_>, _>>()?;
    let mut rates: BTreeMap<Violation, f64> = Violation::ALL.iter().map(|&v| (v, 0.0)).collect();
    if !cues.is_empty() {
        for c in &cues {
            for v in &c.violations {
                *rates.get_mut(v).expect("all kinds present") += 1.0;
            }
        }
        for r in rates.values_mut() {
            *r /= cues.len() as f64;
        }
    }
    Ok(ReadabilityReport { cues, rates })
}
