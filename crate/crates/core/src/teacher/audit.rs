use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// One line of the teacher audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub ts: String,
    pub task_id: String,
    pub attempt: u32,
    pub event: String,
    pub model: String,
    pub body: String,
}

impl AuditEntry {
    fn new(event: &str, task_id: &str, attempt: u32, model: &str, body: &str) -> Self {
        Self {
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            task_id: task_id.to_string(),
            attempt,
            event: event.to_string(),
            model: model.to_string(),
            body: body.to_string(),
        }
    }

    pub fn request(task_id: &str, attempt: u32, model: &str, prompt: &str) -> Self {
        Self::new("request", task_id, attempt, model, prompt)
    }

    pub fn reply(task_id: &str, attempt: u32, model: &str, content: &str) -> Self {
        Self::new("reply", task_id, attempt, model, content)
    }

    pub fn error(task_id: &str, attempt: u32, model: &str, message: &str) -> Self {
        Self::new("error", task_id, attempt, model, message)
    }
}

/// Append-only JSONL audit file, safe to share between workers.
pub struct AuditLog {
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, entry: &AuditEntry) -> io::Result<()> {
        let line = serde_json::to_string(entry).map_err(io::Error::other)?;
        let mut out = self.out.lock().map_err(|_| io::Error::other("audit log poisoned"))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()
    }
}
