//! JSON-Lines session log: one header line, then one `EventRecord` per line
//! in strict seq order.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::protocol::{DenialReason, Envelope, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub world_sha256: String,
    pub rules_sha256: String,
    pub version: String,
    #[serde(default)]
    pub session: String,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// Where the live session loaded its world from; replay falls back to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_path: Option<String>,
}

fn default_tick_ms() -> u64 {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Delivered,
    Denied,
}

/// One logged message: the envelope as sequenced by the server, what
/// happened to it, and the simulator tick at which it was processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub envelope: Envelope,
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<DenialReason>,
    /// Receivers the message actually reached.
    #[serde(default)]
    pub receivers: Vec<Role>,
    /// Allowed receivers that were disconnected at the time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Role>,
    pub tick: u64,
}

impl EventRecord {
    pub fn seq(&self) -> u64 {
        self.envelope.seq
    }

    pub fn is_delivered(&self) -> bool {
        self.disposition == Disposition::Delivered
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("file_not_found: {0}")]
    FileNotFound(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad_header: {0}")]
    BadHeader(String),
    #[error("bad_record at line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("corrupt_log({seq}): expected seq {seq}, found {found}")]
    CorruptLog { seq: u64, found: u64 },
    #[error("world_mismatch: log expects world sha256 {expected}, file has {found}")]
    WorldMismatch { expected: String, found: String },
    #[error("world: {0}")]
    World(#[from] crate::sim::WorldError),
    #[error("no world file given and the log header names none")]
    NoWorld,
}

impl LogError {
    pub fn code(&self) -> &'static str {
        match self {
            LogError::FileNotFound(_) => "file_not_found",
            LogError::Io(_) => "io",
            LogError::BadHeader(_) => "bad_header",
            LogError::BadRecord { .. } => "bad_record",
            LogError::CorruptLog { .. } => "corrupt_log",
            LogError::WorldMismatch { .. } => "world_mismatch",
            LogError::World(e) => e.code(),
            LogError::NoWorld => "no_world",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<EventRecord>,
}

impl SessionLog {
    pub fn read(path: impl AsRef<Path>) -> Result<SessionLog, LogError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => LogError::FileNotFound(path.display().to_string()),
            _ => LogError::Io(e),
        })?;
        SessionLog::from_reader(BufReader::new(file))
    }

    pub fn parse(text: &str) -> Result<SessionLog, LogError> {
        SessionLog::from_reader(text.as_bytes())
    }

    /// Parse and check that seq runs 0, 1, 2, … with no gaps.
    pub fn from_reader(reader: impl BufRead) -> Result<SessionLog, LogError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(LogError::BadHeader("empty log".into())),
                Some((_, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str::<LogHeader>(&line)
                        .map_err(|e| LogError::BadHeader(e.to_string()))?;
                }
            }
        };
        let mut records = Vec::new();
        for (index, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: EventRecord = serde_json::from_str(&line).map_err(|e| LogError::BadRecord {
                line: index + 1,
                message: e.to_string(),
            })?;
            let expected = records.len() as u64;
            if record.seq() != expected {
                return Err(LogError::CorruptLog {
                    seq: expected,
                    found: record.seq(),
                });
            }
            records.push(record);
        }
        Ok(SessionLog { header, records })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Append-only writer; every record is flushed as it is written.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: impl Into<PathBuf>, header: &LogHeader) -> io::Result<LogWriter> {
        let path = path.into();
        let mut out = BufWriter::new(File::create(&path)?);
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(LogWriter { path, out })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}
