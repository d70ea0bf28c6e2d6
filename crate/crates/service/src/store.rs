//! Append-only JSONL event log and state snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::model::LogEntry;
use crate::state::State;

/// The event log. Entries are kept in memory and, when backed by a file,
/// appended to it one JSON object per line.
pub struct EventStore {
    file: Option<File>,
    entries: Vec<LogEntry>,
}

impl EventStore {
    pub fn in_memory() -> Self {
        Self {
            file: None,
            entries: Vec::new(),
        }
    }

    /// Opens (or creates) a log file and reads its entries.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let entries = if path.exists() {
            read_log(path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file: Some(file),
            entries,
        })
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn append(&mut self, entry: LogEntry) -> Result<(), ServiceError> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        self.entries.push(entry);
        Ok(())
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line).map_err(|e| {
            ServiceError::Invalid(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: State,
}

/// Writes the state atomically (temp file, then rename).
pub fn write_snapshot(path: &Path, state: &State) -> Result<(), ServiceError> {
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec(&Snapshot { state: state.clone() })?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Option<State>, ServiceError> {
    if !path.exists() {
        return Ok(None);
    }
    let snap: Snapshot = serde_json::from_slice(&fs::read(path)?)?;
    Ok(Some(snap.state))
}
