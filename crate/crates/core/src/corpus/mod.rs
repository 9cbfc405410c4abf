//! Chat-log ingestion: JSONL parsing, text normalization, corpus-level
//! typo repair and merging of messages that were split mid-sentence.

mod lemma;
mod lm;
mod merge;
mod preprocess;
mod stem;
mod typo;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::LexiconSource;

pub use lemma::Lemmatizer;
pub use lm::{lm_tokens, ngram_perplexity, BigramLm};
pub use merge::merge_broken_utterances;
pub use preprocess::{is_tag, preprocess_utterance, tokenize, Preprocessor};
pub use stem::porter_stem;
pub use typo::correct_typos;

/// One line of an exported chat log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    /// Epoch milliseconds, UTC.
    pub time: i64,
    #[serde(rename = "id")]
    pub author_id: String,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PlaceholderKind {
    Url,
    Email,
    Html,
    Code,
    Id,
}

impl PlaceholderKind {
    pub const ALL: [PlaceholderKind; 5] = [
        PlaceholderKind::Url,
        PlaceholderKind::Email,
        PlaceholderKind::Html,
        PlaceholderKind::Code,
        PlaceholderKind::Id,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlaceholderKind::Url => "URL",
            PlaceholderKind::Email => "EMAIL",
            PlaceholderKind::Html => "HTML",
            PlaceholderKind::Code => "CODE",
            PlaceholderKind::Id => "ID",
        }
    }

    pub fn tag(self) -> String {
        format!("[{}]", self.name())
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name.trim())
    }
}

/// Multiset of placeholder substitutions; serialized as a map of the
/// nonzero counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<PlaceholderKind, usize>", into = "BTreeMap<PlaceholderKind, usize>")]
pub struct PlaceholderCounts([usize; 5]);

impl PlaceholderCounts {
    pub fn add(&mut self, kind: PlaceholderKind) {
        self.0[kind as usize] += 1;
    }

    pub fn get(&self, kind: PlaceholderKind) -> usize {
        self.0[kind as usize]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn merge(&mut self, other: &PlaceholderCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

impl From<BTreeMap<PlaceholderKind, usize>> for PlaceholderCounts {
    fn from(map: BTreeMap<PlaceholderKind, usize>) -> Self {
        let mut c = PlaceholderCounts::default();
        for (k, v) in map {
            c.0[k as usize] = v;
        }
        c
    }
}

impl From<PlaceholderCounts> for BTreeMap<PlaceholderKind, usize> {
    fn from(c: PlaceholderCounts) -> Self {
        PlaceholderKind::ALL
            .into_iter()
            .filter(|k| c.get(*k) > 0)
            .map(|k| (k, c.get(k)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub time: i64,
    pub author_id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    #[serde(rename = "placeholders_hit")]
    pub placeholders: PlaceholderCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub stopwords: LexiconSource,
    pub acronyms: LexiconSource,
    pub emoji: LexiconSource,
    pub placeholders: LexiconSource,
    pub lemma_rules: LexiconSource,
    pub perplexity_threshold: f64,
    /// Seconds.
    pub merge_time_gap_max: u64,
    pub typo_correction: bool,
    /// Tokens seen fewer times than this are candidates for correction;
    /// tokens seen at least this often form the reference vocabulary.
    pub typo_min_count: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: LexiconSource::Bundled,
            acronyms: LexiconSource::Bundled,
            emoji: LexiconSource::Bundled,
            placeholders: LexiconSource::Bundled,
            lemma_rules: LexiconSource::Bundled,
            perplexity_threshold: 40.0,
            merge_time_gap_max: 60,
            typo_correction: true,
            typo_min_count: 3,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity_threshold > 0.0) {
            return Err(Error::Config(format!(
                "perplexity_threshold must be > 0, got {}",
                self.perplexity_threshold
            )));
        }
        if self.typo_min_count == 0 {
            return Err(Error::Config("typo_min_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// A chronological log of preprocessed utterances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatLog {
    pub community_id: String,
    pub utterances: Vec<Utterance>,
}

impl ChatLog {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Checks chronological order and contiguous indexes.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, u) in self.utterances.iter().enumerate() {
            if u.index != i {
                return Err(Error::Contract(format!("utterance at position {i} has index {}", u.index)));
            }
            if i > 0 && u.time < self.utterances[i - 1].time {
                return Err(Error::Contract(format!("utterance {i} is earlier than its predecessor")));
            }
        }
        Ok(())
    }

    pub fn reindex(&mut self) {
        for (i, u) in self.utterances.iter_mut().enumerate() {
            u.index = i;
        }
    }
}

/// Parsed but not yet normalized messages, sorted by time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawChatLog {
    pub community_id: String,
    pub messages: Vec<RawMessage>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub line_no: usize,
    pub reason: String,
}

fn check_message(msg: &RawMessage) -> std::result::Result<(), String> {
    if msg.time < 0 {
        return Err(format!("negative time {}", msg.time));
    }
    if msg.author_id.is_empty() {
        return Err("empty id".into());
    }
    Ok(())
}

/// Parses JSONL messages from a reader. Blank lines are ignored; lines
/// that fail to parse or validate land in the skip report.
pub fn parse_chat_log_from<R: BufRead>(
    reader: R,
    community_id: &str,
    source: &Path,
) -> Result<(RawChatLog, Vec<SkipRecord>)> {
    let mut messages = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawMessage>(&line)
            .map_err(|e| e.to_string())
            .and_then(|m| check_message(&m).map(|_| m));
        match parsed {
            Ok(m) => messages.push(m),
            Err(reason) => skipped.push(SkipRecord { line_no: i + 1, reason }),
        }
    }
    messages.sort_by_key(|m| m.time);
    Ok((
        RawChatLog {
            community_id: community_id.to_string(),
            messages,
        },
        skipped,
    ))
}

pub fn parse_chat_log(path: &Path, community_id: &str) -> Result<(RawChatLog, Vec<SkipRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_chat_log_from(BufReader::new(file), community_id, path)
}

pub fn write_raw_messages<W: Write>(mut out: W, messages: &[RawMessage]) -> Result<()> {
    for m in messages {
        let line = serde_json::to_string(m).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(&item).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))
}

/// Reads utterances written by [`write_jsonl`] back into a log.
pub fn read_utterances(path: &Path, community_id: &str) -> Result<ChatLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut utterances = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        utterances.push(u);
    }
    let log = ChatLog {
        community_id: community_id.to_string(),
        utterances,
    };
    log.check_invariants().map_err(|e| Error::Data(e.to_string()))?;
    Ok(log)
}

/// Normalizes every message, drops messages whose clean text is empty and
/// optionally repairs rare tokens against the log's own vocabulary.
pub fn preprocess_log(raw: &RawChatLog, pre: &Preprocessor, cfg: &PreprocessConfig) -> ChatLog {
    let mut utterances: Vec<Utterance> = raw
        .messages
        .iter()
        .map(|m| pre.preprocess(m, 0))
        .filter(|u| !u.clean_text.is_empty())
        .collect();
    if cfg.typo_correction {
        correct_typos(&mut utterances, cfg.typo_min_count);
    }
    let mut log = ChatLog {
        community_id: raw.community_id.clone(),
        utterances,
    };
    log.reindex();
    log
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub log: ChatLog,
    pub skipped: Vec<SkipRecord>,
    pub dropped_empty: usize,
    pub merged: usize,
}

/// Full ingest: parse, normalize, fit the bigram model on the log and
/// merge broken messages.
pub fn ingest(path: &Path, community_id: &str, cfg: &PreprocessConfig) -> Result<IngestReport> {
    let (raw, skipped) = parse_chat_log(path, community_id)?;
    let pre = Preprocessor::new(cfg)?;
    Ok(ingest_raw(&raw, skipped, &pre, cfg))
}

pub fn ingest_raw(raw: &RawChatLog, skipped: Vec<SkipRecord>, pre: &Preprocessor, cfg: &PreprocessConfig) -> IngestReport {
    let log = preprocess_log(raw, pre, cfg);
    let dropped_empty = raw.messages.len() - log.len();
    let lm = BigramLm::fit_texts(log.utterances.iter().map(|u| u.clean_text.as_str()));
    let before = log.len();
    let log = merge_broken_utterances(&log, cfg, &lm);
    IngestReport {
        merged: before - log.len(),
        log,
        skipped,
        dropped_empty,
    }
}

/// Community name derived from a file stem.
pub fn community_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| PathBuf::from(path).display().to_string())
}
