use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::ServiceRecord;
use crate::intent::{Intent, IntentState};
use crate::southbound::InstallReport;
use crate::topology::TopologyEvent;

/// A state mutation. Replaying the same records in order rebuilds the same
/// intents, ledger and topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LogRecord {
    IntentSubmitted(Intent),
    #[serde(rename_all = "camelCase")]
    StateChanged {
        intent_id: String,
        state: IntentState,
        reason: String,
    },
    Reserved(ServiceRecord),
    #[serde(rename_all = "camelCase")]
    Released { intent_id: String },
    InstallReport(InstallReport),
    TopologyEvent(TopologyEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub sequence: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(flatten)]
    pub record: LogRecord,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("event log corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("event log out of order at line {line}: expected sequence {expected}, found {found}")]
    Sequence { line: usize, expected: u64, found: u64 },
}

/// Append-only JSON-lines log. Every append is flushed and synced before
/// the caller applies the change.
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_sequence: u64,
}

impl EventLog {
    /// Opens (creating if needed) a log whose last entry has `last_sequence`.
    pub fn open(path: &Path, last_sequence: u64) -> Result<Self, LogError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            next_sequence: last_sequence + 1,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: LogRecord) -> Result<LogEntry, LogError> {
        let entry = LogEntry {
            sequence: self.next_sequence,
            timestamp: now_ms(),
            record,
        };
        let line = serde_json::to_string(&entry).expect("log entries serialize");
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        self.file.sync_data()?;
        self.next_sequence += 1;
        Ok(entry)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Reads a whole log, checking that sequences run 1, 2, 3, ... A missing
/// file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, LogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let number = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line).map_err(|e| LogError::Corrupt {
            line: number,
            reason: e.to_string(),
        })?;
        let expected = out.len() as u64 + 1;
        if entry.sequence != expected {
            return Err(LogError::Sequence {
                line: number,
                expected,
                found: entry.sequence,
            });
        }
        out.push(entry);
    }
    Ok(out)
}
