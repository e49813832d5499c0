//! Directory-backed job store and queue.
//!
//! ```text
//! <root>/jobs/<id>.json                  job records
//! <root>/queue/pending/<nanos>-<id>.json messages waiting for a worker
//! <root>/queue/inflight/<id>.<claim>.json claimed messages with a lease
//! <root>/idempotency/<sha256(key)>       job id for an idempotency key
//! <root>/terminal/<id>                   final job record, created once
//! <root>/artifacts/<id>/                 executor outputs
//! ```
//!
//! Every state change is a whole-file write to a temporary name followed by
//! a rename, so readers never see partial files. Claiming a message is a
//! rename out of `pending/`, which only one worker can win. The terminal
//! record is created with a hard link, which fails if it already exists:
//! a job reaches a terminal state exactly once even if a stalled worker
//! wakes up after its message was redelivered.

use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use crate::{Job, QueueMessage};

#[derive(Debug, thiserror::Error)]
#[error("store at {path}: {source}")]
pub struct StoreError {
    pub path: PathBuf,
    pub source: io::Error,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn now_nanos() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos())
}

fn ctx(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError { path: path.to_path_buf(), source }
}

/// A claimed message and the file that holds the claim.
#[derive(Debug, Clone)]
pub struct Claim {
    pub message: QueueMessage,
    pub(crate) path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = DirStore { root: root.into() };
        for d in ["jobs", "queue/pending", "queue/inflight", "idempotency", "terminal", "artifacts", "tmp"] {
            let p = store.root.join(d);
            fs::create_dir_all(&p).map_err(ctx(&p))?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{id}.json"))
    }

    fn terminal_path(&self, id: &str) -> PathBuf {
        self.root.join("terminal").join(id)
    }

    pub fn artifacts_dir(&self, id: &str) -> PathBuf {
        self.root.join("artifacts").join(id)
    }

    fn tmp_path(&self) -> PathBuf {
        self.root.join("tmp").join(uuid::Uuid::new_v4().to_string())
    }

    /// Serializes `value` into a fresh temporary file.
    fn write_tmp<T: Serialize>(&self, value: &T) -> Result<PathBuf, StoreError> {
        let tmp = self.tmp_path();
        let bytes = serde_json::to_vec_pretty(value).expect("store records serialize");
        fs::write(&tmp, bytes).map_err(ctx(&tmp))?;
        Ok(tmp)
    }

    fn write_atomic<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let tmp = self.write_tmp(value)?;
        fs::rename(&tmp, path).map_err(ctx(path))
    }

    fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| StoreError { path: path.to_path_buf(), source: io::Error::new(ErrorKind::InvalidData, e) }),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError { path: path.to_path_buf(), source: e }),
        }
    }

    /// Current record; the terminal record wins over a stale working copy.
    pub fn load_job(&self, id: &str) -> Result<Option<Job>, StoreError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Ok(None);
        }
        if let Some(done) = Self::read_json::<Job>(&self.terminal_path(id))? {
            return Ok(Some(done));
        }
        Self::read_json(&self.job_path(id))
    }

    pub fn save_job(&self, job: &Job) -> Result<(), StoreError> {
        self.write_atomic(&self.job_path(&job.job_id), job)
    }

    /// Removes a job record that was never enqueued.
    pub fn discard_job(&self, id: &str) -> Result<(), StoreError> {
        let p = self.job_path(id);
        match fs::remove_file(&p) {
            Err(e) if e.kind() != ErrorKind::NotFound => Err(StoreError { path: p, source: e }),
            _ => Ok(()),
        }
    }

    pub fn is_terminal(&self, id: &str) -> bool {
        self.terminal_path(id).exists()
    }

    /// Publishes the final record. Returns `false`, changing nothing, when
    /// the job already has one.
    pub fn finish_job(&self, job: &Job) -> Result<bool, StoreError> {
        let tmp = self.write_tmp(job)?;
        let marker = self.terminal_path(&job.job_id);
        let won = match fs::hard_link(&tmp, &marker) {
            Ok(()) => true,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => false,
            Err(e) => {
                let _ = fs::remove_file(&tmp);
                return Err(StoreError { path: marker, source: e });
            }
        };
        if won {
            fs::rename(&tmp, self.job_path(&job.job_id)).map_err(ctx(&marker))?;
        } else {
            let _ = fs::remove_file(&tmp);
        }
        Ok(won)
    }

    pub fn idempotency_path(&self, key: &str) -> PathBuf {
        self.root.join("idempotency").join(hex::encode(Sha256::digest(key.as_bytes())))
    }

    /// Binds `key` to `job_id` unless already bound; returns the bound id.
    pub fn bind_idempotency(&self, key: &str, job_id: &str) -> Result<String, StoreError> {
        let path = self.idempotency_path(key);
        let tmp = self.tmp_path();
        fs::write(&tmp, job_id).map_err(ctx(&tmp))?;
        let linked = fs::hard_link(&tmp, &path);
        let _ = fs::remove_file(&tmp);
        match linked {
            Ok(()) => Ok(job_id.to_string()),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                fs::read_to_string(&path).map(|s| s.trim().to_string()).map_err(ctx(&path))
            }
            Err(e) => Err(StoreError { path, source: e }),
        }
    }

    pub fn lookup_idempotency(&self, key: &str) -> Result<Option<String>, StoreError> {
        let path = self.idempotency_path(key);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s.trim().to_string())),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError { path, source: e }),
        }
    }

    pub fn enqueue(&self, message: &QueueMessage) -> Result<(), StoreError> {
        let name = format!("{:039}-{}.json", now_nanos(), message.job_id);
        self.write_atomic(&self.root.join("queue/pending").join(name), message)
    }

    fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(ctx(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        Ok(v)
    }

    pub fn pending_count(&self) -> Result<usize, StoreError> {
        Ok(Self::sorted_entries(&self.root.join("queue/pending"))?.len())
    }

    pub fn inflight_count(&self) -> Result<usize, StoreError> {
        Ok(Self::sorted_entries(&self.root.join("queue/inflight"))?.len())
    }

    /// Claims the oldest pending message, counting a delivery and setting
    /// a lease.
    pub fn claim(&self, lease_ms: u64) -> Result<Option<Claim>, StoreError> {
        let inflight = self.root.join("queue/inflight");
        for pending in Self::sorted_entries(&self.root.join("queue/pending"))? {
            let Some(mut message) = Self::read_json::<QueueMessage>(&pending)? else { continue };
            let target = inflight.join(format!("{}.{}.json", message.job_id, uuid::Uuid::new_v4().simple()));
            match fs::rename(&pending, &target) {
                Ok(()) => {}
                // Another worker won this one.
                Err(e) if e.kind() == ErrorKind::NotFound => continue,
                Err(e) => return Err(StoreError { path: pending, source: e }),
            }
            message.deliveries += 1;
            message.lease_until_ms = Some(now_ms() + lease_ms);
            self.write_atomic(&target, &message)?;
            return Ok(Some(Claim { message, path: target }));
        }
        Ok(None)
    }

    /// Extends a claim's lease; `false` if the claim is gone.
    pub fn renew(&self, claim: &Claim, lease_ms: u64) -> Result<bool, StoreError> {
        // Take the file out of sight first; a plain rewrite could resurrect
        // a claim that was requeued in the meantime.
        let stash = claim.path.with_extension("renewing");
        match fs::rename(&claim.path, &stash) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(false),
            Err(e) => return Err(StoreError { path: claim.path.clone(), source: e }),
        }
        let mut m = claim.message.clone();
        m.lease_until_ms = Some(now_ms() + lease_ms);
        let bytes = serde_json::to_vec_pretty(&m).expect("store records serialize");
        fs::write(&stash, bytes).map_err(ctx(&stash))?;
        fs::rename(&stash, &claim.path).map_err(ctx(&claim.path))?;
        Ok(true)
    }

    pub fn ack(&self, claim: &Claim) -> Result<(), StoreError> {
        let _ = fs::remove_file(claim.path.with_extension("renewing"));
        match fs::remove_file(&claim.path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(()),
            Err(e) => Err(StoreError { path: claim.path.clone(), source: e }),
        }
    }

    /// Returns a claimed message to the queue, keeping its delivery count.
    pub fn nack(&self, claim: &Claim) -> Result<(), StoreError> {
        let mut m = claim.message.clone();
        m.lease_until_ms = None;
        self.enqueue(&m)?;
        self.ack(claim)
    }

    /// Requeues claims whose lease expired (their worker died or hung).
    pub fn requeue_expired(&self) -> Result<usize, StoreError> {
        let now = now_ms();
        let mut n = 0;
        for path in Self::sorted_entries(&self.root.join("queue/inflight"))? {
            let Some(message) = Self::read_json::<QueueMessage>(&path)? else { continue };
            if message.lease_until_ms.is_some_and(|t| t <= now) {
                let claim = Claim { message, path };
                // Remove first: if another process already requeued it,
                // the file is gone and nothing is duplicated.
                match fs::remove_file(&claim.path) {
                    Ok(()) => {
                        let mut m = claim.message;
                        m.lease_until_ms = None;
                        self.enqueue(&m)?;
                        n += 1;
                    }
                    Err(e) if e.kind() == ErrorKind::NotFound => {}
                    Err(e) => return Err(StoreError { path: claim.path, source: e }),
                }
            }
        }
        Ok(n)
    }

    pub fn job_ids(&self) -> Result<Vec<String>, StoreError> {
        Ok(Self::sorted_entries(&self.root.join("jobs"))?
            .iter()
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
            .collect())
    }

    /// Whether any pending or inflight message refers to `job_id`.
    pub fn has_message(&self, job_id: &str) -> Result<bool, StoreError> {
        let pending = Self::sorted_entries(&self.root.join("queue/pending"))?;
        let inflight = Self::sorted_entries(&self.root.join("queue/inflight"))?;
        Ok(pending.iter().chain(&inflight).any(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.contains(job_id))
        }))
    }
}
