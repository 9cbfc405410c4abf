//! Splitting an interleaved chat log into dialogs.
//!
//! Every message picks its best-scoring parent among the previous
//! `lookback` messages or a fresh start; dialogs are the connected
//! components of those links. Each dialog is then split into a head (the
//! initiator's opening messages) and a body.

mod features;
mod scorer;

use serde::{Deserialize, Serialize};

use crate::corpus::{ChatLog, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::HeuristicLexicons;

pub use features::{LinkContext, LinkFeatureConfig};
pub use scorer::{
    link_examples, train_link_scorer, LinkScorer, LinkScorerConfig, LinkTrainConfig, LinkTrainingLog, OracleScorer,
    ReplyScorer, TableScorer,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisentangleConfig {
    /// A message whose best candidate scores below this starts a new dialog.
    pub threshold: f64,
}

impl Default for DisentangleConfig {
    fn default() -> Self {
        DisentangleConfig { threshold: 0.5 }
    }
}

/// One disentangled dialog with its head/body split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dialog {
    /// Index of the earliest member.
    pub subject_id: usize,
    pub members: Vec<usize>,
    pub initiator_id: String,
    /// The initiator's opening messages joined into one utterance.
    pub head: Utterance,
    pub head_sources: Vec<usize>,
    pub body: Vec<Utterance>,
}

/// Output record for the dialogs JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogRecord {
    pub subject_id: usize,
    pub member_indexes: Vec<usize>,
    pub head_text: String,
    pub initiator_id: String,
}

impl From<&Dialog> for DialogRecord {
    fn from(d: &Dialog) -> Self {
        DialogRecord {
            subject_id: d.subject_id,
            member_indexes: d.members.clone(),
            head_text: d.head.raw_text.clone(),
            initiator_id: d.initiator_id.clone(),
        }
    }
}

fn join_text(parts: impl Iterator<Item = String>) -> String {
    parts.filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Builds a dialog from chronological member indexes: the head joins the
/// initiator's messages up to the first message by anyone else; all later
/// messages, including the initiator's, form the body.
pub fn split_head_body(log: &ChatLog, members: &[usize]) -> Result<Dialog> {
    let Some(&first) = members.first() else {
        return Err(Error::Contract("a dialog needs at least one member".into()));
    };
    if members.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("dialog members must strictly increase".into()));
    }
    if let Some(&bad) = members.iter().find(|&&m| m >= log.len()) {
        return Err(Error::Contract(format!("member {bad} outside a log of {}", log.len())));
    }
    let utts: Vec<&Utterance> = members.iter().map(|&m| &log.utterances[m]).collect();
    let initiator = utts[0].author_id.clone();
    let head_len = utts.iter().take_while(|u| u.author_id == initiator).count();
    let (head_part, body_part) = utts.split_at(head_len);

    let mut placeholders = head_part[0].placeholders.clone();
    for u in &head_part[1..] {
        placeholders.merge(&u.placeholders);
    }
    let head = Utterance {
        index: first,
        time: head_part[0].time,
        author_id: initiator.clone(),
        raw_text: join_text(head_part.iter().map(|u| u.raw_text.clone())),
        clean_text: join_text(head_part.iter().map(|u| u.clean_text.clone())),
        tokens: head_part.iter().flat_map(|u| u.tokens.iter().cloned()).collect(),
        placeholders,
    };
    Ok(Dialog {
        subject_id: first,
        members: members.to_vec(),
        initiator_id: initiator,
        head,
        head_sources: members[..head_len].to_vec(),
        body: body_part.iter().map(|u| (*u).clone()).collect(),
    })
}

/// Chooses a parent (`None` = new dialog) for every message.
pub fn decode_links(ctx: &LinkContext, scorer: &dyn ReplyScorer, cfg: &DisentangleConfig) -> Result<Vec<Option<usize>>> {
    let lookback = ctx.config().lookback;
    (0..ctx.log().len())
        .map(|child| {
            let candidates: Vec<Option<usize>> = std::iter::once(None)
                .chain((child.saturating_sub(lookback)..child).map(Some))
                .collect();
            let scores = scorer.score_candidates(ctx, child, &candidates)?;
            if scores.len() != candidates.len() || scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::Contract(format!("scorer returned unusable scores for message {child}")));
            }
            // Later candidates win ties: `>=` while scanning forward.
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s >= scores[best] {
                    best = i;
                }
            }
            Ok(if scores[best] < cfg.threshold { None } else { candidates[best] })
        })
        .collect()
}

/// Connected components of a parent assignment, each sorted, ordered by
/// their first member.
pub fn link_components(parents: &[Option<usize>]) -> Vec<Vec<usize>> {
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    let n = parents.len();
    let mut root: Vec<usize> = (0..n).collect();
    for (child, parent) in parents.iter().enumerate() {
        if let Some(p) = *parent {
            let (a, b) = (find(&mut root, child), find(&mut root, p));
            // The smaller index stays the root so it names the component.
            root[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut root, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Disentangles `log` into dialogs ordered by subject id.
pub fn assemble_dialogs(
    log: &ChatLog,
    scorer: &dyn ReplyScorer,
    features: &LinkFeatureConfig,
    lexicons: &HeuristicLexicons,
    cfg: &DisentangleConfig,
) -> Result<Vec<Dialog>> {
    let ctx = LinkContext::new(log, features, lexicons);
    let parents = decode_links(&ctx, scorer, cfg)?;
    link_components(&parents)
        .iter()
        .map(|members| split_head_body(log, members))
        .collect()
}

#[cfg(test)]
mod tests;
