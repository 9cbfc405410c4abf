//! Word-bigram language model with add-one smoothing, fit on the log
//! being ingested.

use std::collections::{HashMap, HashSet};

use regex::Regex;
use std::sync::OnceLock;

const START: &str = "<s>";

/// Bigram counts. `p(w | h) = (c(h, w) + 1) / (c(h) + V)` where `c(h)` is
/// the number of bigrams starting at `h` and `V` the number of word types
/// seen in training (at least 1).
#[derive(Clone, Debug, Default)]
pub struct BigramLm {
    history: HashMap<String, u64>,
    bigrams: HashMap<(String, String), u64>,
    vocab: HashSet<String>,
}

impl BigramLm {
    pub fn fit<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        let mut lm = BigramLm::default();
        for sentence in sentences {
            let mut prev = START;
            for w in sentence.as_ref() {
                lm.vocab.insert(w.clone());
                *lm.history.entry(prev.to_string()).or_default() += 1;
                *lm.bigrams.entry((prev.to_string(), w.clone())).or_default() += 1;
                prev = w;
            }
        }
        lm
    }

    /// Fits on the LM view of each text.
    pub fn fit_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::fit(texts.into_iter().map(lm_tokens))
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn prob(&self, prev: &str, word: &str) -> f64 {
        let v = self.vocab.len().max(1) as f64;
        let pair = self
            .bigrams
            .get(&(prev.to_string(), word.to_string()))
            .copied()
            .unwrap_or(0) as f64;
        let hist = self.history.get(prev).copied().unwrap_or(0) as f64;
        (pair + 1.0) / (hist + v)
    }

    /// Perplexity of a token sequence; `+inf` when it is empty.
    pub fn perplexity(&self, tokens: &[String]) -> f64 {
        if tokens.is_empty() {
            return f64::INFINITY;
        }
        let mut prev = START;
        let mut log_sum = 0.0;
        for w in tokens {
            log_sum += self.prob(prev, w).ln();
            prev = w;
        }
        (-log_sum / tokens.len() as f64).exp()
    }
}

/// Tokens the LM sees: words and placeholder tags of a clean text,
/// punctuation dropped.
pub fn lm_tokens(text: &str) -> Vec<String> {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let re = WORD.get_or_init(|| Regex::new(r"\[[A-Z][A-Z0-9_]*\]|[\p{L}\p{N}_]+(?:['’][\p{L}\p{N}]+)*").unwrap());
    re.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

pub fn ngram_perplexity(text: &str, lm: &BigramLm) -> f64 {
    lm.perplexity(&lm_tokens(text))
}
