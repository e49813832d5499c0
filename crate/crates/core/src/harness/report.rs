use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{aggregate, MetricsReport, MetricsRow, Typology};
use crate::metrics::Violation;
use crate::reviewer::{paired_significance, Alternative, PairedTestResult};

/// Hypotheses named `<model>@reviewed` are the post-edited version of
/// `<model>` and are paired with it for review-gain series.
pub const REVIEWED_SUFFIX: &str = "@reviewed";

pub const REPORT_COLUMNS: &[&str] = &[
    "episode_id",
    "typology",
    "model_id",
    "wer",
    "suber",
    "eer",
    "semantic",
    "ncs_low",
    "ncs_high",
    "msd_low",
    "msd_high",
    "cps_low",
    "cps_high",
    "window_wer_min",
    "window_wer_max",
    "unmatched_speech_words",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report has no rows")]
    Empty,
    #[error("{path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::IoFailure { path: path.to_path_buf(), source }
}

fn fmt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn row_cells(r: &MetricsRow) -> Vec<String> {
    let rate = |v: Violation| r.readability.as_ref().map(|m| m.get(&v).copied().unwrap_or(0.0));
    vec![
        r.episode_id.clone(),
        r.typology.label().to_string(),
        r.model_id.clone(),
        fmt_f(r.wer),
        fmt_f(r.suber),
        fmt_f(r.eer),
        fmt_f(r.semantic),
        fmt_f(rate(Violation::NcsLow)),
        fmt_f(rate(Violation::NcsHigh)),
        fmt_f(rate(Violation::MsdLow)),
        fmt_f(rate(Violation::MsdHigh)),
        fmt_f(rate(Violation::CpsLow)),
        fmt_f(rate(Violation::CpsHigh)),
        fmt_f(r.window_wer_min),
        fmt_f(r.window_wer_max),
        r.unmatched_speech_words.map(|n| n.to_string()).unwrap_or_default(),
    ]
}

/// The per-row CSV, header plus one line per row, fixed precision.
pub fn rows_csv(report: &MetricsReport) -> Vec<u8> {
    csv_bytes(REPORT_COLUMNS, report.rows.iter().map(row_cells))
}

/// Quantile by linear interpolation between order statistics (the
/// "inclusive" method). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme points within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn boxplot(values: &[f64]) -> Option<BoxplotStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    Some(BoxplotStats {
        n: v.len(),
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewGain {
    pub episode_id: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewGainSeries {
    pub metric: String,
    pub model_id: String,
    /// Sorted by increasing delta (after minus before).
    pub gains: Vec<ReviewGain>,
    /// One-sided test that the reviewed version lowers the metric.
    pub test: Option<PairedTestResult>,
}

fn metric_of(r: &MetricsRow, metric: &str) -> Option<f64> {
    match metric {
        "wer" => r.wer,
        "suber" => r.suber,
        "eer" => r.eer,
        _ => None,
    }
}

/// Pairs `X@reviewed` rows with `X` rows of the same episode.
pub fn review_gains(rows: &[MetricsRow], metric: &str) -> Vec<ReviewGainSeries> {
    let by_key: BTreeMap<(&str, &str), &MetricsRow> =
        rows.iter().map(|r| ((r.episode_id.as_str(), r.model_id.as_str()), r)).collect();
    let mut series: BTreeMap<&str, Vec<ReviewGain>> = BTreeMap::new();
    for r in rows {
        let Some(base) = r.model_id.strip_suffix(REVIEWED_SUFFIX) else { continue };
        let Some(orig) = by_key.get(&(r.episode_id.as_str(), base)) else { continue };
        if let (Some(before), Some(after)) = (metric_of(orig, metric), metric_of(r, metric)) {
            series.entry(base).or_default().push(ReviewGain { episode_id: r.episode_id.clone(), before, after, delta: after - before });
        }
    }
    series
        .into_iter()
        .map(|(model, mut gains)| {
            gains.sort_by(|a, b| a.delta.total_cmp(&b.delta).then_with(|| a.episode_id.cmp(&b.episode_id)));
            let deltas: Vec<f64> = gains.iter().map(|g| g.delta).collect();
            ReviewGainSeries {
                metric: metric.to_string(),
                model_id: model.to_string(),
                test: paired_significance(&deltas, Alternative::Less).ok(),
                gains,
            }
        })
        .collect()
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Writes boxplot and review-gain plot data into `dir`.
pub fn write_plots(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut groups: BTreeMap<(&str, Typology, &str), Vec<f64>> = BTreeMap::new();
    for r in &report.rows {
        for metric in ["wer", "suber", "eer"] {
            if let Some(v) = metric_of(r, metric) {
                groups.entry((metric, r.typology, r.model_id.as_str())).or_default().push(v);
            }
        }
    }
    let header = ["metric", "typology", "model_id", "n", "min", "q1", "median", "q3", "max", "whisker_low", "whisker_high", "outliers"];
    let box_rows = groups.iter().filter_map(|(&(metric, typ, model), vals)| {
        let b = boxplot(vals)?;
        let outliers = b.outliers.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";");
        Some(vec![
            metric.to_string(),
            typ.label().to_string(),
            model.to_string(),
            b.n.to_string(),
            fmt_f(Some(b.min)),
            fmt_f(Some(b.q1)),
            fmt_f(Some(b.median)),
            fmt_f(Some(b.q3)),
            fmt_f(Some(b.max)),
            fmt_f(Some(b.whisker_low)),
            fmt_f(Some(b.whisker_high)),
            outliers,
        ])
    });
    let box_path = dir.join("boxplots.csv");
    write(&box_path, &csv_bytes(&header, box_rows))?;

    let series: Vec<ReviewGainSeries> = ["eer", "wer"].iter().flat_map(|m| review_gains(&report.rows, m)).collect();
    let gain_rows = series.iter().flat_map(|s| {
        s.gains.iter().enumerate().map(move |(rank, g)| {
            vec![
                s.metric.clone(),
                s.model_id.clone(),
                rank.to_string(),
                g.episode_id.clone(),
                fmt_f(Some(g.before)),
                fmt_f(Some(g.after)),
                fmt_f(Some(g.delta)),
            ]
        })
    });
    let gain_path = dir.join("review_gain.csv");
    write(&gain_path, &csv_bytes(&["metric", "model_id", "rank", "episode_id", "before", "after", "delta"], gain_rows))?;

    let test_rows = series.iter().map(|s| {
        let t = s.test.as_ref();
        vec![
            s.metric.clone(),
            s.model_id.clone(),
            t.map(|t| t.n.to_string()).unwrap_or_default(),
            fmt_f(t.map(|t| t.statistic)),
            fmt_f(t.map(|t| t.p_value)),
            fmt_f(t.map(|t| t.mean_delta)),
            t.map(|t| if t.exact { "exact" } else { "normal" }.to_string()).unwrap_or_default(),
        ]
    });
    let test_path = dir.join("review_gain_tests.csv");
    write(&test_path, &csv_bytes(&["metric", "model_id", "n", "w_plus", "p_value_less", "mean_delta", "method"], test_rows))?;
    Ok(vec![box_path, gain_path, test_path])
}

/// Writes `report.csv` (or `report.json`), `aggregates.csv`, `errors.csv`
/// into `out_dir`, and plot data into `plots_dir` when given. Returns the
/// written paths.
pub fn emit_report(
    report: &MetricsReport,
    format: ReportFormat,
    out_dir: &Path,
    plots_dir: Option<&Path>,
) -> Result<Vec<PathBuf>, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let p = out_dir.join("report.csv");
            write(&p, &rows_csv(report))?;
            written.push(p);
        }
        ReportFormat::Json => {
            let p = out_dir.join("report.json");
            let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
            bytes.push(b'\n');
            write(&p, &bytes)?;
            written.push(p);
        }
    }
    let agg_rows = report.aggregates.iter().map(|a| {
        vec![
            a.typology.label().to_string(),
            a.model_id.clone(),
            a.rows.to_string(),
            fmt_f(a.wer),
            fmt_f(a.suber),
            fmt_f(a.eer),
            fmt_f(a.semantic),
        ]
    });
    let p = out_dir.join("aggregates.csv");
    write(&p, &csv_bytes(&["typology", "model_id", "rows", "wer", "suber", "eer", "semantic"], agg_rows))?;
    written.push(p);
    let err_rows = report.errors.iter().map(|e| vec![e.episode_id.clone(), e.model_id.clone(), e.message.clone()]);
    let p = out_dir.join("errors.csv");
    write(&p, &csv_bytes(&["episode_id", "model_id", "message"], err_rows))?;
    written.push(p);
    if let Some(dir) = plots_dir {
        written.extend(write_plots(report, dir)?);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<MetricsReport, ReportError> {
    let raw = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&raw).map_err(|e| ReportError::Malformed { path: path.to_path_buf(), reason: e.to_string() })
}

/// Concatenates rows and errors; aggregates are recomputed.
pub fn merge_reports(reports: impl IntoIterator<Item = MetricsReport>) -> MetricsReport {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in reports {
        rows.extend(r.rows);
        errors.extend(r.errors);
    }
    let aggregates = aggregate(&rows);
    MetricsReport { rows, errors, aggregates }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ep: &str, model: &str, eer: f64) -> MetricsRow {
        MetricsRow {
            episode_id: ep.into(),
            typology: Typology::TalkShow,
            model_id: model.into(),
            wer: Some(0.1),
            suber: None,
            eer: Some(eer),
            semantic: None,
            readability: None,
            window_wer_min: None,
            window_wer_max: None,
            unmatched_speech_words: None,
            notes: vec![],
        }
    }

    #[test]
    fn quartiles_of_five() {
        let b = boxplot(&[0.5, 0.1, 0.3, 0.2, 0.4]).unwrap();
        assert!((b.median - 0.3).abs() < 1e-12);
        assert!((b.q1 - 0.2).abs() < 1e-12);
        assert!((b.q3 - 0.4).abs() < 1e-12);
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn outliers_beyond_fences() {
        let b = boxplot(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_high, 4.0);
    }

    #[test]
    fn gains_sorted_ascending() {
        let rows = vec![
            row("a", "w", 0.5),
            row("a", "w@reviewed", 0.2),
            row("b", "w", 0.1),
            row("b", "w@reviewed", 0.2),
            row("c", "w", 0.4),
            row("c", "w@reviewed", 0.2),
        ];
        let s = review_gains(&rows, "eer");
        assert_eq!(s.len(), 1);
        let d: Vec<f64> = s[0].gains.iter().map(|g| (g.delta * 10.0).round() / 10.0).collect();
        assert_eq!(d, vec![-0.3, -0.2, 0.1]);
    }

    #[test]
    fn empty_report_is_rejected() {
        let r = MetricsReport { rows: vec![], errors: vec![], aggregates: vec![] };
        assert!(matches!(emit_report(&r, ReportFormat::Csv, Path::new("/nonexistent"), None), Err(ReportError::Empty)));
    }
}
