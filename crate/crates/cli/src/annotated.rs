//! Chats with known reply links, for training the link scorer.
//!
//! One JSON object per line, in chronological order:
//! `{"time": 1600000000000, "id": "alice", "text": "...", "parent": 3}`.
//! `parent` is the 0-based line number (blank lines excluded) of the
//! message being replied to, or `null` for a message that opens a dialog.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chatmine::corpus::{community_from_path, preprocess_log, ChatLog, PreprocessConfig, Preprocessor, RawChatLog, RawMessage};
use chatmine::{Error, Result};
use serde::Deserialize;

#[derive(Deserialize)]
struct Line {
    #[serde(flatten)]
    message: RawMessage,
    parent: Option<usize>,
}

pub struct AnnotatedChat {
    pub log: ChatLog,
    pub parents: Vec<Option<usize>>,
}

/// `lookback` is the link scorer's maximum reply distance.
pub fn read_annotated(path: &Path, cfg: &PreprocessConfig, lookback: usize) -> Result<AnnotatedChat> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut messages = Vec::new();
    let mut parents = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), no + 1)))?;
        let i = messages.len();
        if let Some(p) = parsed.parent {
            if p >= i || i - p > lookback {
                return Err(Error::Data(format!(
                    "{}:{}: parent {p} is not within {lookback} messages before message {i}",
                    path.display(),
                    no + 1
                )));
            }
        }
        if let Some(prev) = messages.last().map(|m: &RawMessage| m.time) {
            if parsed.message.time < prev {
                return Err(Error::Data(format!("{}:{}: messages out of time order", path.display(), no + 1)));
            }
        }
        messages.push(parsed.message);
        parents.push(parsed.parent);
    }
    let raw = RawChatLog {
        community_id: community_from_path(path),
        messages,
    };
    let log = preprocess_log(&raw, &Preprocessor::new(cfg)?, cfg);
    if log.len() != raw.messages.len() {
        return Err(Error::Data(format!(
            "{}: {} messages are empty after cleaning; annotated chats must keep every line",
            path.display(),
            raw.messages.len() - log.len()
        )));
    }
    Ok(AnnotatedChat { log, parents })
}
