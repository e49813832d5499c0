//! `subqa`: evaluate subtitle corpora, segment transcripts, review
//! subtitles with an LLM provider, merge reports and run the job service.
//!
//! Exit codes: 0 success, 1 partial result (row errors, failed processing),
//! 2 invalid invocation (bad arguments, unreadable or invalid inputs).

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use subqa_core::harness::{
    emit_report, load_report, merge_reports, rows_csv, run_corpus, write_plots, CorpusRunSpec, HarnessError, ReportFormat,
};
use subqa_core::metrics::LexicalScorer;
use subqa_core::model::{emit_srt, parse_srt};
use subqa_core::reviewer::{AuditLog, ReviewMode};
use subqa_core::segmenter::SegmenterConfig;
use subqa_service::executor::{load_segmenter_config, make_provider, review_subtitles, segment_transcript};
use subqa_service::{DefaultExecutor, JobService, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "subqa", version, about = "Subtitle quality assurance toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every hypothesis of a corpus manifest against its reference.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of wer,suber,eer,readability,semantic.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Turn a word-timed transcript into a broadcast-compliant SRT.
    Segment {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Segmenter settings (TOML, or JSON by extension).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Post-edit an SRT through a reviewer provider.
    Review {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: ReviewMode,
        /// `mock` or `http`.
        #[arg(long)]
        provider: String,
        /// Provider settings for `http` (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Append one JSON line per provider call here.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Merge the `report.json` files under a directory of runs.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Directory for plot data (boxplots, review gains).
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP job service with its workers until interrupted.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

fn parse_mode(s: &str) -> Result<ReviewMode, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Bad arguments or unusable inputs.
    #[error("{0}")]
    Invalid(String),
    /// The work ran but did not fully succeed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

/// Completed, possibly with some rows missing.
enum Outcome {
    Done,
    Partial(String),
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn eval(spec: &Path, out: &Path, metrics: Option<Vec<String>>, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let mut run = CorpusRunSpec::load(spec).map_err(|e| match e {
        HarnessError::SpecInvalid(m) => CliError::Invalid(format!("{}: {m}", spec.display())),
        other => invalid(other),
    })?;
    if let Some(names) = metrics {
        let names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
        run.metrics = run.metrics.only(&names).map_err(CliError::Invalid)?;
    }
    if jobs.is_some() {
        run.jobs = jobs;
    }
    run.validate().map_err(invalid)?;
    let report = run_corpus(&run, &LexicalScorer).map_err(invalid)?;
    for e in &report.errors {
        log::error!("{}/{}: {}", e.episode_id, e.model_id, e.message);
    }
    if report.rows.is_empty() {
        return Err(CliError::Failed(format!("no rows evaluated ({} errors)", report.errors.len())));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Failed(format!("{}: {e}", out.display())))?;
    emit_report(&report, ReportFormat::Json, out, None).map_err(|e| CliError::Failed(e.to_string()))?;
    emit_report(&report, ReportFormat::Csv, out, Some(&out.join("plots"))).map_err(|e| CliError::Failed(e.to_string()))?;
    log::info!("{} rows written to {}", report.rows.len(), out.display());
    if report.errors.is_empty() {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::Partial(format!("{} of {} rows failed", report.errors.len(), report.errors.len() + report.rows.len())))
    }
}

fn segment(transcript: &Path, out: &Path, config: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = match config {
        Some(p) => load_segmenter_config(p).map_err(CliError::Invalid)?,
        None => SegmenterConfig::default(),
    };
    if !transcript.is_file() {
        return Err(CliError::Invalid(format!("{}: not a readable file", transcript.display())));
    }
    let file = segment_transcript(transcript, &cfg).map_err(CliError::Failed)?;
    write_file(out, &emit_srt(&file))?;
    log::info!("{} cues written to {}", file.len(), out.display());
    Ok(Outcome::Done)
}

fn review(
    input: &Path,
    mode: ReviewMode,
    provider: &str,
    config: Option<&Path>,
    out: &Path,
    audit: Option<&Path>,
) -> Result<Outcome, CliError> {
    let raw = std::fs::read(input).map_err(|e| CliError::Invalid(format!("{}: {e}", input.display())))?;
    let file = parse_srt(&raw).map_err(|e| CliError::Invalid(format!("{}: {e}", input.display())))?;
    let provider = make_provider(provider, config).map_err(CliError::Invalid)?;
    let log = match audit {
        Some(p) => Some(AuditLog::append_to(p).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let cfg = SegmenterConfig::default();
    let reviewed = review_subtitles(&file, mode, provider.as_ref(), log.as_ref(), &cfg).map_err(CliError::Failed)?;
    for f in &reviewed.flags {
        log::warn!("cue {} kept original text: {:?}", f.cue + 1, f.reason);
    }
    write_file(out, &emit_srt(&reviewed.file))?;
    log::info!("{} of {} cues revised, {} flagged", reviewed.changed, file.len(), reviewed.flags.len());
    Ok(Outcome::Done)
}

fn find_reports(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_reports(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "report.json") {
            found.push(p);
        }
    }
    Ok(())
}

fn report(runs: &Path, format: Format, plots: Option<&Path>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let mut paths = Vec::new();
    find_reports(runs, &mut paths).map_err(|e| CliError::Invalid(format!("{}: {e}", runs.display())))?;
    if paths.is_empty() {
        return Err(CliError::Invalid(format!("no report.json under {}", runs.display())));
    }
    let reports = paths.iter().map(|p| load_report(p)).collect::<Result<Vec<_>, _>>().map_err(invalid)?;
    let merged = merge_reports(reports);
    let bytes = match format {
        Format::Csv => rows_csv(&merged),
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(&merged).map_err(|e| CliError::Failed(e.to_string()))?;
            b.push(b'\n');
            b
        }
    };
    if let Some(dir) = plots {
        write_plots(&merged, dir).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    match out {
        Some(p) => write_file(p, &bytes)?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Failed(e.to_string()))?,
    }
    if merged.errors.is_empty() {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::Partial(format!("merged runs carry {} row errors", merged.errors.len())))
    }
}

fn serve(store: &Path, host: std::net::IpAddr, port: u16, workers: usize) -> Result<Outcome, CliError> {
    let svc = JobService::open(store, ServiceConfig::default()).map_err(invalid)?;
    let server = subqa_service::http::spawn(svc, SocketAddr::new(host, port), workers, Arc::new(DefaultExecutor))
        .map_err(|e| CliError::Invalid(format!("starting service: {e}")))?;
    eprintln!("listening on http://{}", server.local_addr());
    server.wait_for_ctrl_c().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Eval { spec, out, metrics, jobs } => eval(&spec, &out, metrics, jobs),
        Command::Segment { transcript, out, config } => segment(&transcript, &out, config.as_deref()),
        Command::Review { input, mode, provider, config, out, audit } => {
            review(&input, mode, &provider, config.as_deref(), &out, audit.as_deref())
        }
        Command::Report { runs, format, plots, out } => report(&runs, format, plots.as_deref(), out.as_deref()),
        Command::Serve { store, port, workers, host } => serve(&store, host, port, workers),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(msg)) => {
            eprintln!("subqa: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("subqa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
