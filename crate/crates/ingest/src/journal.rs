//! Append-only JSON-lines journal of session snapshots. Replaying it keeps
//! the last snapshot per session id.

use crate::session::Session;
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
#[error("journal {path}: {source}")]
pub struct JournalError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

/// Sessions recovered from a journal in first-seen order.
#[derive(Debug, Default)]
pub struct Replay {
    pub sessions: Vec<Session>,
    /// Lines that did not parse, 1-based.
    pub skipped_lines: Vec<usize>,
}

impl Journal {
    pub fn open(path: &Path) -> Result<(Self, Replay), JournalError> {
        let err = |source| JournalError {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let replay = if path.exists() { replay(path).map_err(err)? } else { Replay::default() };
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            replay,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one snapshot and flushes it to the OS before returning.
    pub fn append(&mut self, session: &Session) -> Result<(), JournalError> {
        let mut line = serde_json::to_vec(session).expect("session serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|source| JournalError {
                path: self.path.clone(),
                source,
            })
    }
}

fn replay(path: &Path) -> std::io::Result<Replay> {
    let reader = BufReader::new(File::open(path)?);
    let mut order = Vec::new();
    let mut latest: BTreeMap<String, Session> = BTreeMap::new();
    let mut skipped_lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Session>(&line) {
            Ok(s) => {
                if !latest.contains_key(&s.session_id) {
                    order.push(s.session_id.clone());
                }
                latest.insert(s.session_id.clone(), s);
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), line = i + 1, "skipping journal line: {e}");
                skipped_lines.push(i + 1);
            }
        }
    }
    let sessions = order.into_iter().filter_map(|id| latest.remove(&id)).collect();
    Ok(Replay { sessions, skipped_lines })
}
