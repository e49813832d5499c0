//! Headless job service: HTTP submission, a persistent directory-backed
//! queue and worker threads running segmentation, review and evaluation.
//!
//! Delivery is at-least-once. A message is claimed with a lease that the
//! worker keeps renewing; if the worker dies the lease runs out and the
//! message goes back to the queue. Executors must therefore be idempotent
//! (they only write into the job's own artifact directory), and the terminal
//! state is published exactly once by the store.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub mod executor;
pub mod http;
pub mod store;

pub use executor::{DefaultExecutor, Executor};
pub use store::{Claim, DirStore, StoreError};

use store::now_ms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobKind {
    Segment,
    Evaluate,
    Review,
    FullPipeline,
}

impl JobKind {
    /// Inputs that must be present, and which of them name files.
    fn required_inputs(self) -> &'static [&'static str] {
        match self {
            JobKind::Segment => &["transcript"],
            JobKind::Evaluate => &["manifest"],
            JobKind::Review => &["srt"],
            JobKind::FullPipeline => &["transcript", "reference"],
        }
    }
}

impl FromStr for JobKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Segment" | "segment" => Ok(JobKind::Segment),
            "Evaluate" | "evaluate" => Ok(JobKind::Evaluate),
            "Review" | "review" => Ok(JobKind::Review),
            "FullPipeline" | "full_pipeline" => Ok(JobKind::FullPipeline),
            other => Err(format!("unknown job kind `{other}`")),
        }
    }
}

/// Input keys holding file paths; all other inputs are plain options.
pub const PATH_INPUTS: &[&str] = &["transcript", "manifest", "srt", "reference", "entities", "provider_config", "segmenter_config"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub kind: JobKind,
    pub inputs: BTreeMap<String, String>,
    pub state: JobState,
    /// Unix milliseconds.
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    /// Artifact name to path.
    pub artifacts: BTreeMap<String, String>,
    pub error: Option<String>,
    /// Deliveries of the queue message seen so far.
    pub deliveries: u32,
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueMessage {
    pub job_id: String,
    pub enqueued_at: u64,
    pub deliveries: u32,
    pub lease_until_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Deliveries allowed before a job is failed as poison.
    pub max_deliveries: u32,
    pub lease_ms: u64,
    /// Renew the lease while an executor runs.
    pub heartbeat: bool,
    /// Idle sleep between empty polls in the worker loop.
    pub poll_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { max_deliveries: 3, lease_ms: 30_000, heartbeat: true, poll_ms: 200 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid inputs: {0}")]
    InvalidInputs(String),
    #[error("store unavailable: {0}")]
    StoreUnavailable(#[from] StoreError),
    #[error("job `{0}` not found")]
    NotFound(String),
}

/// Outcome of a submission: the job and whether this call created it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub job: Job,
    pub created: bool,
}

#[derive(Debug, Clone)]
pub struct JobService {
    store: DirStore,
    config: ServiceConfig,
}

impl JobService {
    pub fn open(root: impl Into<PathBuf>, config: ServiceConfig) -> Result<Self, ServiceError> {
        Ok(JobService { store: DirStore::open(root)?, config })
    }

    pub fn store(&self) -> &DirStore {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn validate(kind: JobKind, inputs: &BTreeMap<String, String>) -> Result<(), ServiceError> {
        for key in kind.required_inputs() {
            if !inputs.contains_key(*key) {
                return Err(ServiceError::InvalidInputs(format!("{kind:?} needs input `{key}`")));
            }
        }
        for (key, value) in inputs {
            if PATH_INPUTS.contains(&key.as_str()) && !Path::new(value).is_file() {
                return Err(ServiceError::InvalidInputs(format!("input `{key}`: `{value}` is not a readable file")));
            }
        }
        if let Some(mode) = inputs.get("mode") {
            subqa_core::reviewer::ReviewMode::from_str(mode).map_err(ServiceError::InvalidInputs)?;
        }
        match inputs.get("provider").map(String::as_str) {
            None | Some("mock") | Some("http") => Ok(()),
            Some(p) => Err(ServiceError::InvalidInputs(format!("unknown provider `{p}` (expected mock or http)"))),
        }
    }

    pub fn submit(
        &self,
        kind: JobKind,
        inputs: BTreeMap<String, String>,
        idempotency_key: Option<&str>,
    ) -> Result<Job, ServiceError> {
        self.submit_detailed(kind, inputs, idempotency_key).map(|s| s.job)
    }

    /// Persists a Queued job and enqueues it. A repeated idempotency key
    /// returns the job first created for it and enqueues nothing.
    pub fn submit_detailed(
        &self,
        kind: JobKind,
        inputs: BTreeMap<String, String>,
        idempotency_key: Option<&str>,
    ) -> Result<Submission, ServiceError> {
        if let Some(key) = idempotency_key {
            if let Some(id) = self.store.lookup_idempotency(key)? {
                if let Some(job) = self.store.load_job(&id)? {
                    return Ok(Submission { job, created: false });
                }
            }
        }
        Self::validate(kind, &inputs)?;
        let job = Job {
            job_id: uuid::Uuid::new_v4().to_string(),
            kind,
            inputs,
            state: JobState::Queued,
            submitted_at: now_ms(),
            started_at: None,
            finished_at: None,
            artifacts: BTreeMap::new(),
            error: None,
            deliveries: 0,
            idempotency_key: idempotency_key.map(str::to_string),
        };
        self.store.save_job(&job)?;
        if let Some(key) = idempotency_key {
            let bound = self.store.bind_idempotency(key, &job.job_id)?;
            if bound != job.job_id {
                // Lost a race with a concurrent submission of the same key.
                self.store.discard_job(&job.job_id)?;
                let existing = self.store.load_job(&bound)?.ok_or_else(|| ServiceError::NotFound(bound.clone()))?;
                return Ok(Submission { job: existing, created: false });
            }
        }
        self.store.enqueue(&QueueMessage { job_id: job.job_id.clone(), enqueued_at: now_ms(), deliveries: 0, lease_until_ms: None })?;
        log::info!("submitted {:?} job {}", job.kind, job.job_id);
        Ok(Submission { job, created: true })
    }

    pub fn get_job(&self, job_id: &str) -> Result<Job, ServiceError> {
        self.store.load_job(job_id)?.ok_or_else(|| ServiceError::NotFound(job_id.to_string()))
    }

    /// Startup repair: requeues expired claims and Queued jobs whose
    /// message never made it to the queue. Returns the number requeued.
    pub fn recover(&self) -> Result<usize, ServiceError> {
        let mut n = self.store.requeue_expired()?;
        for id in self.store.job_ids()? {
            let Some(job) = self.store.load_job(&id)? else { continue };
            if job.state != JobState::Queued || self.store.has_message(&id)? {
                continue;
            }
            // A job orphaned by a lost idempotency race stays dormant.
            if let Some(key) = &job.idempotency_key {
                if self.store.lookup_idempotency(key)?.as_deref() != Some(id.as_str()) {
                    continue;
                }
            }
            self.store.enqueue(&QueueMessage { job_id: id, enqueued_at: now_ms(), deliveries: 0, lease_until_ms: None })?;
            n += 1;
        }
        Ok(n)
    }

    fn finish(&self, mut job: Job, outcome: Result<BTreeMap<String, String>, String>) -> Result<(), StoreError> {
        job.finished_at = Some(now_ms());
        match outcome {
            Ok(artifacts) => {
                job.state = JobState::Succeeded;
                job.artifacts = artifacts;
            }
            Err(e) => {
                job.state = JobState::Failed;
                job.error = Some(if e.trim().is_empty() { "executor failed".to_string() } else { e });
            }
        }
        if self.store.finish_job(&job)? {
            log::info!("job {} {:?}", job.job_id, job.state);
        } else {
            log::warn!("job {} already finished; discarding late result", job.job_id);
        }
        Ok(())
    }

    /// Processes at most one message. Returns the number of jobs that
    /// reached a terminal state (0 or 1). Failures land in the job record;
    /// only store errors are returned.
    pub fn worker_step(&self, executor: &dyn Executor) -> Result<usize, ServiceError> {
        self.store.requeue_expired()?;
        let Some(claim) = self.store.claim(self.config.lease_ms)? else { return Ok(0) };
        let id = claim.message.job_id.clone();
        let Some(mut job) = self.store.load_job(&id)? else {
            log::warn!("dropping message for unknown job {id}");
            self.store.ack(&claim)?;
            return Ok(0);
        };
        if job.state.is_terminal() {
            // Duplicate delivery of a job that already finished.
            self.store.ack(&claim)?;
            return Ok(0);
        }
        job.deliveries = claim.message.deliveries;
        if claim.message.deliveries > self.config.max_deliveries {
            let err = format!("poison: gave up after {} deliveries", self.config.max_deliveries);
            job.deliveries = self.config.max_deliveries;
            self.finish(job, Err(err))?;
            self.store.ack(&claim)?;
            return Ok(1);
        }
        job.state = JobState::Running;
        job.started_at = Some(now_ms());
        self.store.save_job(&job)?;

        let out_dir = self.store.artifacts_dir(&id);
        let outcome = self.run_with_heartbeat(&claim, || {
            std::fs::create_dir_all(&out_dir).map_err(|e| format!("creating {}: {e}", out_dir.display()))?;
            executor.execute(&job, &out_dir)
        });
        match outcome {
            Some(result) => {
                let result = result.and_then(|artifacts| {
                    match artifacts.iter().find(|(_, p)| !Path::new(p).is_file()) {
                        Some((name, p)) => Err(format!("artifact `{name}` missing at {p}")),
                        None => Ok(artifacts),
                    }
                });
                self.finish(job, result)?;
                self.store.ack(&claim)?;
                Ok(1)
            }
            None => {
                log::warn!("executor panicked on job {id} (delivery {})", claim.message.deliveries);
                self.store.nack(&claim)?;
                Ok(0)
            }
        }
    }

    /// Runs `f` while renewing the claim's lease; `None` if `f` panicked.
    fn run_with_heartbeat<T>(&self, claim: &Claim, f: impl FnOnce() -> T) -> Option<T> {
        if !self.config.heartbeat {
            return catch_unwind(AssertUnwindSafe(f)).ok();
        }
        let done = AtomicBool::new(false);
        let every = Duration::from_millis((self.config.lease_ms / 3).max(1));
        std::thread::scope(|s| {
            s.spawn(|| {
                let mut waited = Duration::ZERO;
                while !done.load(Ordering::SeqCst) {
                    std::thread::sleep(Duration::from_millis(10));
                    waited += Duration::from_millis(10);
                    if waited >= every {
                        waited = Duration::ZERO;
                        match self.store.renew(claim, self.config.lease_ms) {
                            Ok(true) => {}
                            Ok(false) => break,
                            Err(e) => log::warn!("lease renewal failed: {e}"),
                        }
                    }
                }
            });
            let out = catch_unwind(AssertUnwindSafe(f)).ok();
            done.store(true, Ordering::SeqCst);
            out
        })
    }

    /// Steps until the queue is empty. Returns the jobs finished.
    pub fn drain(&self, executor: &dyn Executor) -> Result<usize, ServiceError> {
        let mut total = 0;
        loop {
            let before = self.store.pending_count()?;
            let n = self.worker_step(executor)?;
            total += n;
            if n == 0 && before == 0 {
                return Ok(total);
            }
        }
    }

    /// Worker loop: polls until `stop` is set.
    pub fn run_worker(&self, executor: &dyn Executor, stop: &AtomicBool) {
        while !stop.load(Ordering::SeqCst) {
            match self.worker_step(executor) {
                Ok(0) => {
                    if self.store.pending_count().unwrap_or(0) == 0 {
                        std::thread::sleep(Duration::from_millis(self.config.poll_ms));
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    log::error!("worker step failed: {e}");
                    std::thread::sleep(Duration::from_millis(self.config.poll_ms));
                }
            }
        }
    }
}
