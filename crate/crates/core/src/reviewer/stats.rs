use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest sample evaluated with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Deltas tend to be negative (e.g. an error rate went down).
    Less,
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    /// Non-zero deltas actually ranked.
    pub n: usize,
    /// Sum of ranks of positive deltas.
    pub statistic: f64,
    pub p_value: f64,
    pub mean_delta: f64,
    pub alternative: Alternative,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no non-zero deltas to test ({given} given)")]
    TooFewSamples { given: usize },
    #[error("delta {0} is not finite")]
    NonFinite(usize),
}

/// Wilcoxon signed-rank test on paired differences. Zero deltas are
/// dropped and tied magnitudes get average ranks. Exact below
/// [`EXACT_MAX_N`] non-zero deltas, normal approximation with tie and
/// continuity correction above.
pub fn paired_significance(deltas: &[f64], alternative: Alternative) -> Result<PairedTestResult, StatsError> {
    if let Some(i) = deltas.iter().position(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let nz: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Err(StatsError::TooFewSamples { given: deltas.len() });
    }
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;

    // Doubled average ranks are integers.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));
    let mut rank2 = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[order[j + 1]].abs() == nz[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j hold ranks i+1..=j+1; doubled average is i+j+2.
        for &k in &order[i..=j] {
            rank2[k] = (i + j + 2) as u64;
        }
        tie_sizes.push((j - i + 1) as f64);
        i = j + 1;
    }
    let w2: u64 = (0..n).filter(|&k| nz[k] > 0.0).map(|k| rank2[k]).sum();
    let statistic = w2 as f64 / 2.0;

    let (p_less, p_greater, exact) = if n <= EXACT_MAX_N {
        let (le, ge) = exact_tails(&rank2, w2);
        (le, ge, true)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let tie_adj: f64 = tie_sizes.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
        let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj).sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (normal.cdf((statistic - mu + 0.5) / sigma), normal.sf((statistic - mu - 0.5) / sigma), false)
    };
    let p_value = match alternative {
        Alternative::Less => p_less,
        Alternative::Greater => p_greater,
        Alternative::TwoSided => 2.0 * p_less.min(p_greater),
    }
    .clamp(0.0, 1.0);
    Ok(PairedTestResult { n, statistic, p_value, mean_delta, alternative, exact })
}

/// `(P(W <= w), P(W >= w))` under the null, by counting sign assignments
/// per attainable rank sum.
fn exact_tails(rank2: &[u64], w2: u64) -> (f64, f64) {
    let total: u64 = rank2.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in rank2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = (1u64 << rank2.len()) as f64;
    let le: u64 = counts[..=w2 as usize].iter().sum();
    let ge: u64 = counts[w2 as usize..].iter().sum();
    (le as f64 / all, ge as f64 / all)
}
