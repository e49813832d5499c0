use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ProviderError, ReviewMode, ReviewRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Ok,
    ContractViolation,
    TransportError,
}

/// One provider call. Hashes are hex SHA-256 of the canonical JSON of the
/// request and of the response (or error text).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub batch_id: String,
    pub mode: ReviewMode,
    pub request_hash: String,
    pub response_hash: String,
    pub outcome: AuditOutcome,
}

/// Line-delimited JSON audit trail, safe to share between threads.
pub struct AuditLog {
    sink: Mutex<Option<BufWriter<File>>>,
    records: Mutex<Vec<AuditRecord>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl AuditLog {
    /// Keeps records in memory only.
    pub fn in_memory() -> Self {
        AuditLog { sink: Mutex::new(None), records: Mutex::new(Vec::new()) }
    }

    /// Appends to `path`, creating it if needed.
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog { sink: Mutex::new(Some(BufWriter::new(f))), records: Mutex::new(Vec::new()) })
    }

    pub(crate) fn record(
        &self,
        batch_id: &str,
        mode: ReviewMode,
        request: &ReviewRequest,
        response: &Result<Vec<String>, ProviderError>,
        outcome: AuditOutcome,
    ) -> std::io::Result<()> {
        let req = serde_json::to_vec(request).expect("request serializes");
        let resp = match response {
            Ok(texts) => serde_json::to_vec(texts).expect("texts serialize"),
            Err(e) => e.to_string().into_bytes(),
        };
        let rec = AuditRecord {
            batch_id: batch_id.to_string(),
            mode,
            request_hash: sha256_hex(&req),
            response_hash: sha256_hex(&resp),
            outcome,
        };
        if let Some(w) = self.sink.lock().expect("audit sink poisoned").as_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.records.lock().expect("audit records poisoned").push(rec);
        Ok(())
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().expect("audit records poisoned").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        let log = AuditLog::append_to(&path).unwrap();
        let req = ReviewRequest { mode: ReviewMode::EntityCorrection, prompt: "p".into(), texts: vec!["a".into()] };
        log.record("0:0-1", req.mode, &req, &Ok(vec!["a".into()]), AuditOutcome::Ok).unwrap();
        log.record("0:0-1", req.mode, &req, &Err(ProviderError::Transport("down".into())), AuditOutcome::TransportError).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<AuditRecord> = raw.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].request_hash, lines[1].request_hash);
        assert_ne!(lines[0].response_hash, lines[1].response_hash);
        assert_eq!(lines[0].request_hash.len(), 64);
        assert!(raw.contains("\"outcome\":\"transport_error\""));
    }
}
