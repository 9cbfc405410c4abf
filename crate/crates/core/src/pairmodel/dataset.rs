//! Labeled dialogs: file format and conversion into model inputs.
//!
//! One JSON object per line:
//! `{"project", "dialog_id"?, "utterances": [{"time", "id", "text"}], "issue", "solution_labels"}`.
//! `solution_labels` has one entry per body utterance (after the head
//! split) when `issue` is true and is empty otherwise; entries may be
//! booleans or 0/1.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{correct_typos, ChatLog, PreprocessConfig, Preprocessor, RawMessage};
use crate::dialog_embed::{HeuristicExtractor, HeuristicVector};
use crate::disentangler::{split_head_body, Dialog};
use crate::error::{Error, Result};
use crate::lexicon::HeuristicLexicons;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Flag {
    Bool(bool),
    Int(u8),
}

impl Flag {
    fn value(self) -> Result<bool> {
        match self {
            Flag::Bool(b) => Ok(b),
            Flag::Int(0) => Ok(false),
            Flag::Int(1) => Ok(true),
            Flag::Int(n) => Err(Error::Data(format!("label {n} is not 0 or 1"))),
        }
    }
}

fn flags<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<bool>, D::Error> {
    let raw: Vec<Flag> = Vec::deserialize(d)?;
    raw.into_iter()
        .map(|f| f.value().map_err(serde::de::Error::custom))
        .collect()
}

fn flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    Flag::deserialize(d)?.value().map_err(serde::de::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub project: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialog_id: Option<String>,
    pub utterances: Vec<RawMessage>,
    #[serde(deserialize_with = "flag")]
    pub issue: bool,
    #[serde(default, deserialize_with = "flags")]
    pub solution_labels: Vec<bool>,
}

/// A dialog with gold labels and its raw attribute rows (head first).
#[derive(Clone, Debug)]
pub struct LabeledDialog {
    pub project: String,
    pub dialog_id: String,
    pub dialog: Dialog,
    pub heuristics: Vec<HeuristicVector>,
    pub issue: bool,
    pub solution_labels: Vec<bool>,
}

pub fn read_labeled_records(path: &Path) -> Result<Vec<LabeledRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

/// Preprocesses each project's dialogs as one chat (no merging, so labels
/// stay aligned), splits heads from bodies and checks the labels.
pub fn build_labeled_dialogs(
    records: &[LabeledRecord],
    cfg: &PreprocessConfig,
    lexicons: &HeuristicLexicons,
) -> Result<Vec<LabeledDialog>> {
    let pre = Preprocessor::new(cfg)?;
    let mut by_project: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (r, rec) in records.iter().enumerate() {
        by_project.entry(rec.project.as_str()).or_default().push(r);
    }
    let mut out: Vec<Option<LabeledDialog>> = vec![None; records.len()];
    for (project, recs) in by_project {
        // (time, record, position) sorted stably by time.
        let mut order: Vec<(i64, usize, usize)> = Vec::new();
        for &r in &recs {
            let rec = &records[r];
            if rec.utterances.is_empty() {
                return Err(Error::Data(format!("{}: dialog has no utterances", describe(rec, r))));
            }
            if rec.utterances.windows(2).any(|w| w[0].time > w[1].time) {
                return Err(Error::Data(format!("{}: utterances are not chronological", describe(rec, r))));
            }
            order.extend(rec.utterances.iter().enumerate().map(|(p, m)| (m.time, r, p)));
        }
        order.sort_by_key(|&(t, _, _)| t);

        let mut utterances = Vec::with_capacity(order.len());
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &(_, r, p)) in order.iter().enumerate() {
            let u = pre.preprocess(&records[r].utterances[p], i);
            if u.clean_text.is_empty() {
                return Err(Error::Data(format!(
                    "{}: utterance {p} is empty after preprocessing",
                    describe(&records[r], r)
                )));
            }
            utterances.push(u);
            members.entry(r).or_default().push(i);
        }
        if cfg.typo_correction {
            correct_typos(&mut utterances, cfg.typo_min_count);
        }
        let chat = ChatLog {
            community_id: project.to_string(),
            utterances,
        };
        let extractor = HeuristicExtractor::new(&chat, lexicons);
        for (r, m) in members {
            let rec = &records[r];
            let dialog = split_head_body(&chat, &m)?;
            let want = if rec.issue { dialog.body.len() } else { 0 };
            if rec.solution_labels.len() != want {
                return Err(Error::Data(format!(
                    "{}: {} solution labels for {} body utterances{}",
                    describe(rec, r),
                    rec.solution_labels.len(),
                    dialog.body.len(),
                    if rec.issue { "" } else { " of a non-issue dialog (expected none)" }
                )));
            }
            out[r] = Some(LabeledDialog {
                project: rec.project.clone(),
                dialog_id: rec.dialog_id.clone().unwrap_or_else(|| format!("{}#{r}", rec.project)),
                heuristics: extractor.dialog_attributes(&dialog),
                dialog,
                issue: rec.issue,
                solution_labels: rec.solution_labels.clone(),
            });
        }
    }
    Ok(out.into_iter().flatten().collect())
}

fn describe(rec: &LabeledRecord, r: usize) -> String {
    match &rec.dialog_id {
        Some(id) => format!("dialog `{id}`"),
        None => format!("record {}", r + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(time: i64, id: &str, text: &str) -> RawMessage {
        RawMessage {
            time,
            author_id: id.into(),
            text: text.into(),
        }
    }

    fn rec(project: &str, utts: Vec<RawMessage>, issue: bool, labels: Vec<bool>) -> LabeledRecord {
        LabeledRecord {
            project: project.into(),
            dialog_id: None,
            utterances: utts,
            issue,
            solution_labels: labels,
        }
    }

    #[test]
    fn parses_numeric_and_boolean_labels() {
        let line = r#"{"project":"p","utterances":[{"time":1,"id":"a","text":"hi"}],"issue":1,"solution_labels":[0,true]}"#;
        let r: LabeledRecord = serde_json::from_str(line).unwrap();
        assert!(r.issue);
        assert_eq!(r.solution_labels, vec![false, true]);
        let bad = r#"{"project":"p","utterances":[],"issue":2}"#;
        assert!(serde_json::from_str::<LabeledRecord>(bad).is_err());
    }

    #[test]
    fn interleaved_dialogs_share_one_chat() {
        let lex = HeuristicLexicons::bundled();
        let records = vec![
            rec(
                "p",
                vec![msg(0, "a", "my build fails with an error"), msg(20, "b", "try a clean install"), msg(40, "a", "that worked")],
                true,
                vec![true, false],
            ),
            rec("p", vec![msg(10, "c", "release is out today"), msg(30, "d", "nice")], false, vec![]),
            rec("q", vec![msg(5, "e", "hello")], false, vec![]),
        ];
        let out = build_labeled_dialogs(&records, &PreprocessConfig::default(), &lex).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].dialog.members, vec![0, 2, 4]);
        assert_eq!(out[1].dialog.members, vec![1, 3]);
        assert_eq!(out[2].dialog.members, vec![0]);
        assert_eq!(out[0].heuristics.len(), 3);
        assert_eq!(out[0].dialog_id, "p#0");
    }

    #[test]
    fn label_length_must_match_body() {
        let lex = HeuristicLexicons::bundled();
        let records = vec![rec("p", vec![msg(0, "a", "it breaks"), msg(1, "b", "update it")], true, vec![])];
        let err = build_labeled_dialogs(&records, &PreprocessConfig::default(), &lex).unwrap_err();
        assert_eq!(err.kind(), "data");
        let records = vec![rec("p", vec![msg(0, "a", "news"), msg(1, "b", "cool")], false, vec![true])];
        assert_eq!(build_labeled_dialogs(&records, &PreprocessConfig::default(), &lex).unwrap_err().kind(), "data");
    }

    #[test]
    fn empty_or_unordered_dialogs_are_rejected() {
        let lex = HeuristicLexicons::bundled();
        let cfg = PreprocessConfig::default();
        let empty_text = vec![rec("p", vec![msg(0, "a", "   ")], false, vec![])];
        assert_eq!(build_labeled_dialogs(&empty_text, &cfg, &lex).unwrap_err().kind(), "data");
        let unordered = vec![rec("p", vec![msg(5, "a", "x"), msg(1, "b", "y")], false, vec![])];
        assert_eq!(build_labeled_dialogs(&unordered, &cfg, &lex).unwrap_err().kind(), "data");
    }
}
