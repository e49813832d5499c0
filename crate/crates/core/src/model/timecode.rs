use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Largest value renderable as `HH:MM:SS,mmm` with a two-digit hour field.
pub const MAX_SRT_MILLIS: u64 = 100 * 3_600_000 - 1;

/// Milliseconds since media start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeCode(u64);

impl TimeCode {
    pub const ZERO: TimeCode = TimeCode(0);

    pub const fn from_millis(millis: u64) -> Self {
        TimeCode(millis)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Converts decimal seconds to milliseconds, rounding to the nearest
    /// millisecond. Negative or non-finite input yields `None`.
    pub fn from_seconds(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        Some(TimeCode((secs * 1000.0).round() as u64))
    }

    pub fn saturating_sub(self, other: TimeCode) -> TimeCode {
        TimeCode(self.0.saturating_sub(other.0))
    }

    pub fn is_srt_renderable(self) -> bool {
        self.0 <= MAX_SRT_MILLIS
    }
}

impl fmt::Display for TimeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let total_s = self.0 / 1000;
        let s = total_s % 60;
        let m = (total_s / 60) % 60;
        let h = total_s / 3600;
        write!(f, "{h:02}:{m:02}:{s:02},{ms:03}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed timecode `{0}`")]
pub struct TimeCodeParseError(pub String);

impl FromStr for TimeCode {
    type Err = TimeCodeParseError;

    /// Parses `HH:MM:SS,mmm`. A `.` is accepted in place of the comma.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TimeCodeParseError(s.to_string());
        let (hms, ms) = s.split_once([',', '.']).ok_or_else(err)?;
        let mut parts = hms.split(':');
        let (h, m, sec) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(m), Some(sec), None) => (h, m, sec),
            _ => return Err(err()),
        };
        let field = |txt: &str, width: usize, max: u64| -> Result<u64, TimeCodeParseError> {
            if txt.len() != width || !txt.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let v: u64 = txt.parse().map_err(|_| err())?;
            if v >= max {
                return Err(err());
            }
            Ok(v)
        };
        let h = field(h, 2, 100)?;
        let m = field(m, 2, 60)?;
        let sec = field(sec, 2, 60)?;
        let ms = field(ms, 3, 1000)?;
        Ok(TimeCode(((h * 60 + m) * 60 + sec) * 1000 + ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_srt_form() {
        assert_eq!(TimeCode::from_millis(0).to_string(), "00:00:00,000");
        assert_eq!(TimeCode::from_millis(3_723_004).to_string(), "01:02:03,004");
        assert_eq!(TimeCode::from_millis(MAX_SRT_MILLIS).to_string(), "99:59:59,999");
    }

    #[test]
    fn parses_and_rejects_out_of_range_fields() {
        assert_eq!("00:00:02,500".parse::<TimeCode>().unwrap().millis(), 2500);
        assert_eq!("00:00:02.500".parse::<TimeCode>().unwrap().millis(), 2500);
        assert!("00:00:61,000".parse::<TimeCode>().is_err());
        assert!("00:60:00,000".parse::<TimeCode>().is_err());
        assert!("0:00:01,000".parse::<TimeCode>().is_err());
        assert!("00:00:01,00".parse::<TimeCode>().is_err());
        assert!("00:00:01".parse::<TimeCode>().is_err());
        assert!("aa:00:01,000".parse::<TimeCode>().is_err());
    }

    #[test]
    fn seconds_conversion_rounds() {
        assert_eq!(TimeCode::from_seconds(1.2).unwrap().millis(), 1200);
        assert_eq!(TimeCode::from_seconds(0.0005).unwrap().millis(), 1);
        assert!(TimeCode::from_seconds(-0.1).is_none());
        assert!(TimeCode::from_seconds(f64::NAN).is_none());
    }
}
