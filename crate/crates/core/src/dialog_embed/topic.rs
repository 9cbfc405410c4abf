//! TF-IDF topic profiles and the distances between them.
//!
//! Documents are the utterances of a chat; `idf(t) = ln(N / df(t))`. A
//! scope (whole chat, dialog head, single utterance) weighs each of its
//! terms by `tf_scope(t) * idf(t)` where `tf` is the term's share of the
//! scope's terms. Two scopes are compared on the union of their top-10
//! terms, each side evaluated with its own weights (zero when absent).

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{is_tag, ChatLog};

pub const TOP_TERMS: usize = 10;

/// Terms of a token list: words and numbers, no punctuation or tags.
pub fn terms(tokens: &[String]) -> impl Iterator<Item = &str> {
    tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !is_tag(t) && t.chars().any(char::is_alphanumeric))
}

/// Term weights of one scope.
pub type ScopeWeights = HashMap<String, f64>;

#[derive(Clone, Debug)]
pub struct TopicIndex {
    idf: HashMap<String, f64>,
    chat: ScopeWeights,
}

impl TopicIndex {
    pub fn new(chat: &ChatLog) -> Self {
        let n = chat.len();
        let mut df: HashMap<String, usize> = HashMap::new();
        for u in &chat.utterances {
            let unique: BTreeSet<&str> = terms(&u.tokens).collect();
            for t in unique {
                *df.entry(t.to_string()).or_default() += 1;
            }
        }
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, (n as f64 / d as f64).ln()))
            .collect();
        let mut index = TopicIndex {
            idf,
            chat: HashMap::new(),
        };
        index.chat = index.weights(chat.utterances.iter().flat_map(|u| terms(&u.tokens)));
        index
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(0.0)
    }

    pub fn chat_weights(&self) -> &ScopeWeights {
        &self.chat
    }

    pub fn weights<'t>(&self, scope_terms: impl IntoIterator<Item = &'t str>) -> ScopeWeights {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut total = 0usize;
        for t in scope_terms {
            *counts.entry(t).or_default() += 1;
            total += 1;
        }
        counts
            .into_iter()
            .map(|(t, c)| (t.to_string(), c as f64 / total as f64 * self.idf(t)))
            .collect()
    }

    pub fn token_weights(&self, tokens: &[String]) -> ScopeWeights {
        self.weights(terms(tokens))
    }

    /// `(TDH, TDU)`: chat against head, head against utterance.
    pub fn deviation(&self, head: &ScopeWeights, utterance: &ScopeWeights) -> (f64, f64) {
        (scope_distance(&self.chat, head), scope_distance(head, utterance))
    }
}

/// Terms ranked by weight, ties broken lexicographically, at most ten.
pub fn top_terms(w: &ScopeWeights) -> Vec<(&str, f64)> {
    let mut v: Vec<(&str, f64)> = w.iter().map(|(t, &x)| (t.as_str(), x)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    v.truncate(TOP_TERMS);
    v
}

/// Top-ten weights, zero-filled to length ten.
pub fn topic_profile(w: &ScopeWeights) -> [f64; TOP_TERMS] {
    let mut out = [0.0; TOP_TERMS];
    for (slot, (_, x)) in out.iter_mut().zip(top_terms(w)) {
        *slot = x;
    }
    out
}

/// Euclidean distance over the union of both scopes' top-ten terms.
pub fn scope_distance(a: &ScopeWeights, b: &ScopeWeights) -> f64 {
    let union: BTreeSet<&str> = top_terms(a).into_iter().chain(top_terms(b)).map(|(t, _)| t).collect();
    union
        .into_iter()
        .map(|t| {
            let d = a.get(t).copied().unwrap_or(0.0) - b.get(t).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
