//! Hand-crafted utterance attributes (29 values).
//!
//! | slots | attribute                                            |
//! |-------|------------------------------------------------------|
//! | 0-5   | what, why, when, who, which, how (word flags)        |
//! | 6, 7  | `?`, `!` present                                     |
//! | 8     | greeting phrase present                              |
//! | 9     | disapproval phrase present                           |
//! | 10    | a word starting with `simi`                          |
//! | 11    | the word `same`                                      |
//! | 12    | token count                                          |
//! | 13    | unique token count                                   |
//! | 14    | unique stem count                                    |
//! | 15    | absolute position in the dialog (1-based)            |
//! | 16    | relative position (absolute / member count)          |
//! | 17    | topic deviation of the head from the chat            |
//! | 18    | topic deviation of the utterance from the head       |
//! | 19-21 | sentiment share (pos, int, neg)                      |
//! | 22-24 | sentiment word counts (pos, int, neg)                |
//! | 25-27 | sentiment emoji counts (pos, int, neg)               |
//! | 28    | author is the dialog initiator                       |
//!
//! Flags read the lowercased clean text; counts read the lemma tokens.

use std::collections::HashSet;

use super::topic::{ScopeWeights, TopicIndex};
use crate::corpus::{is_tag, porter_stem, ChatLog, Utterance};
use crate::disentangler::Dialog;
use crate::lexicon::{contains_phrase, HeuristicLexicons};

pub const HEURISTIC_DIM: usize = 29;

pub const QUESTION_WORDS: [&str; 6] = ["what", "why", "when", "who", "which", "how"];

pub mod slot {
    pub const QUESTION_MARK: usize = 6;
    pub const EXCLAMATION: usize = 7;
    pub const GREETING: usize = 8;
    pub const DISAPPROVAL: usize = 9;
    pub const SIMI: usize = 10;
    pub const SAME: usize = 11;
    pub const TOKENS: usize = 12;
    pub const UNIQUE_TOKENS: usize = 13;
    pub const UNIQUE_STEMS: usize = 14;
    pub const ABS_POSITION: usize = 15;
    pub const REL_POSITION: usize = 16;
    pub const HEAD_DEVIATION: usize = 17;
    pub const UTTERANCE_DEVIATION: usize = 18;
    pub const SENTIMENT_SHARE: usize = 19;
    pub const SENTIMENT_WORDS: usize = 22;
    pub const SENTIMENT_EMOJI: usize = 25;
    pub const INITIATOR: usize = 28;
}

pub type HeuristicVector = [f64; HEURISTIC_DIM];

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'').filter(|w| !w.is_empty())
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Attributes that depend only on the utterance itself.
pub fn text_attributes(u: &Utterance, lexicons: &HeuristicLexicons) -> HeuristicVector {
    let mut out = [0.0; HEURISTIC_DIM];
    let text = u.clean_text.to_lowercase();
    for (i, w) in QUESTION_WORDS.iter().enumerate() {
        out[i] = flag(contains_phrase(&text, w));
    }
    out[slot::QUESTION_MARK] = flag(text.contains('?'));
    out[slot::EXCLAMATION] = flag(text.contains('!'));
    out[slot::GREETING] = flag(lexicons.greetings.iter().any(|g| contains_phrase(&text, g)));
    out[slot::DISAPPROVAL] = flag(lexicons.disapproval.iter().any(|g| contains_phrase(&text, g)));
    out[slot::SIMI] = flag(words(&text).any(|w| w.starts_with("simi")));
    out[slot::SAME] = flag(words(&text).any(|w| w == "same"));

    let nt = u.tokens.len();
    out[slot::TOKENS] = nt as f64;
    out[slot::UNIQUE_TOKENS] = u.tokens.iter().collect::<HashSet<_>>().len() as f64;
    out[slot::UNIQUE_STEMS] = u
        .tokens
        .iter()
        .map(|t| if is_tag(t) { t.clone() } else { porter_stem(t) })
        .collect::<HashSet<_>>()
        .len() as f64;

    let mut sw = [0usize; 3];
    let mut se = [0usize; 3];
    for t in &u.tokens {
        if is_tag(t) {
            if let Some(p) = lexicons.sentiment_emoji.get(t.as_str()) {
                se[p.index()] += 1;
            }
        } else if let Some(p) = lexicons.sentiment_words.get(t.to_lowercase().as_str()) {
            sw[p.index()] += 1;
        }
    }
    for c in 0..3 {
        out[slot::SENTIMENT_WORDS + c] = sw[c] as f64;
        out[slot::SENTIMENT_EMOJI + c] = se[c] as f64;
        out[slot::SENTIMENT_SHARE + c] = (sw[c] + se[c]) as f64 / nt.max(1) as f64;
    }
    out
}

/// Per-chat extractor; holds the chat's TF-IDF statistics.
#[derive(Clone, Debug)]
pub struct HeuristicExtractor<'a> {
    lexicons: &'a HeuristicLexicons,
    topics: TopicIndex,
}

impl<'a> HeuristicExtractor<'a> {
    pub fn new(chat: &ChatLog, lexicons: &'a HeuristicLexicons) -> Self {
        HeuristicExtractor {
            lexicons,
            topics: TopicIndex::new(chat),
        }
    }

    pub fn topics(&self) -> &TopicIndex {
        &self.topics
    }

    /// Attributes of `u` sitting at 1-based `position` among the dialog's
    /// members (the joined head counts as position 1).
    pub fn attributes(&self, u: &Utterance, dialog: &Dialog, head: &ScopeWeights, position: usize) -> HeuristicVector {
        let mut out = text_attributes(u, self.lexicons);
        out[slot::ABS_POSITION] = position as f64;
        out[slot::REL_POSITION] = position as f64 / dialog.members.len() as f64;
        let (tdh, tdu) = self.topics.deviation(head, &self.topics.token_weights(&u.tokens));
        out[slot::HEAD_DEVIATION] = tdh;
        out[slot::UTTERANCE_DEVIATION] = tdu;
        out[slot::INITIATOR] = flag(u.author_id == dialog.initiator_id);
        out
    }

    /// Head first, then every body utterance in order.
    pub fn dialog_attributes(&self, dialog: &Dialog) -> Vec<HeuristicVector> {
        let head = self.topics.token_weights(&dialog.head.tokens);
        let offset = dialog.head_sources.len();
        std::iter::once(self.attributes(&dialog.head, dialog, &head, 1))
            .chain(
                dialog
                    .body
                    .iter()
                    .enumerate()
                    .map(|(j, u)| self.attributes(u, dialog, &head, offset + j + 1)),
            )
            .collect()
    }
}
