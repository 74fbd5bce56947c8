//! Append-only JSON-lines persistence: one file per session plus one for
//! operator events.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::events::EventRecord;

pub const ADMIN_LOG: &str = "admin.jsonl";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{file}:{line}: {source}")]
    Malformed {
        file: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("event log has a gap: expected seq {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
}

/// Where committed events go besides the in-memory log.
pub trait EventSink: Send {
    fn append(&mut self, record: &EventRecord) -> io::Result<()>;
}

/// File name for a session's log; `slot` is the 0-based session index.
pub fn session_log_name(slot: usize) -> String {
    format!("session-{:02}.jsonl", slot + 1)
}

/// Writes every record as one line, each with a single `write_all`.
#[derive(Debug)]
pub struct JsonlSink {
    dir: PathBuf,
    files: HashMap<String, File>,
}

impl JsonlSink {
    /// The directory is created with the first record, so a run that fails
    /// before logging anything leaves nothing behind.
    pub fn create(dir: impl Into<PathBuf>) -> io::Result<JsonlSink> {
        let dir = dir.into();
        if dir.exists() && !dir.is_dir() {
            return Err(io::Error::new(io::ErrorKind::AlreadyExists, format!("{} is not a directory", dir.display())));
        }
        Ok(JsonlSink { dir, files: HashMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl EventSink for JsonlSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        let name = record.slot.map_or_else(|| ADMIN_LOG.to_string(), session_log_name);
        let file = match self.files.get_mut(&name) {
            Some(f) => f,
            None => {
                if self.files.is_empty() {
                    std::fs::create_dir_all(&self.dir)?;
                }
                let f = OpenOptions::new().create(true).append(true).open(self.dir.join(&name))?;
                self.files.entry(name).or_insert(f)
            }
        };
        let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}

pub fn to_jsonl(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("event records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str, file: &str) -> Result<Vec<EventRecord>, LogError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| LogError::Malformed { file: file.to_string(), line: i + 1, source })
        })
        .collect()
}

/// Reads every `.jsonl` file in `dir` and merges them by sequence number.
pub fn read_log_dir(dir: &Path) -> Result<Vec<EventRecord>, LogError> {
    let mut records = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.display().to_string();
        for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|source| LogError::Malformed {
                file: name.clone(),
                line: i + 1,
                source,
            })?;
            records.push(rec);
        }
    }
    records.sort_by_key(|r: &EventRecord| r.seq);
    check_gapless(&records)?;
    Ok(records)
}

pub fn check_gapless(records: &[EventRecord]) -> Result<(), LogError> {
    for (i, r) in records.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.seq != expected {
            return Err(LogError::Gap { expected, found: r.seq });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::events::EventKind;

    fn rec(seq: u64, slot: Option<usize>) -> EventRecord {
        EventRecord {
            seq,
            timestamp_ms: seq * 10,
            slot,
            subject_id: slot.map(|_| format!("S{seq}")),
            subject_seq: slot.map(|_| 1),
            event: match slot {
                Some(s) => EventKind::Registered { slot: s },
                None => EventKind::StrategyTableUploaded { version: "v".into(), toml: String::new() },
            },
        }
    }

    #[test]
    fn files_per_session_merge_back_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = JsonlSink::create(dir.path()).unwrap();
        let records = vec![rec(1, Some(0)), rec(2, None), rec(3, Some(2)), rec(4, Some(0))];
        for r in &records {
            sink.append(r).unwrap();
        }
        assert!(dir.path().join("session-01.jsonl").exists());
        assert!(dir.path().join("session-03.jsonl").exists());
        assert!(dir.path().join(ADMIN_LOG).exists());
        let back = read_log_dir(dir.path()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn gaps_are_reported() {
        let records = vec![rec(1, None), rec(3, None)];
        assert!(matches!(check_gapless(&records), Err(LogError::Gap { expected: 2, found: 3 })));
    }

    #[test]
    fn jsonl_text_round_trip() {
        let records = vec![rec(1, Some(1)), rec(2, None)];
        let text = to_jsonl(&records);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_jsonl(&text, "mem").unwrap(), records);
        assert!(matches!(parse_jsonl("{nope", "mem"), Err(LogError::Malformed { line: 1, .. })));
    }
}
