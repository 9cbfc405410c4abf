//! Rule-table lemmatizer: an exception list followed by ordered suffix rules.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lexicon::parse_map;

#[derive(Clone, Debug)]
struct SuffixRule {
    suffix: String,
    replacement: String,
    min_stem: usize,
}

#[derive(Clone, Debug)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
    rules: Vec<SuffixRule>,
}

impl Lemmatizer {
    pub fn parse(text: &str) -> Result<Self> {
        let mut exceptions = HashMap::new();
        let mut rules = Vec::new();
        for (key, value) in parse_map(text)? {
            if let Some(word) = key.strip_prefix('=') {
                exceptions.insert(word.to_string(), value);
                continue;
            }
            let (replacement, min_stem) = value
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("lemma rule `{key}` needs suffix<TAB>replacement<TAB>min_stem")))?;
            let min_stem = min_stem
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("lemma rule `{key}`: bad min_stem `{min_stem}`")))?;
            rules.push(SuffixRule {
                suffix: key,
                replacement: replacement.to_string(),
                min_stem,
            });
        }
        Ok(Lemmatizer { exceptions, rules })
    }

    /// Lemmatizes a lowercase word. Non-alphabetic tokens pass through.
    pub fn lemma(&self, word: &str) -> String {
        if let Some(l) = self.exceptions.get(word) {
            return l.clone();
        }
        if !word.chars().all(|c| c.is_alphabetic()) {
            return word.to_string();
        }
        for rule in &self.rules {
            let Some(stem) = word.strip_suffix(rule.suffix.as_str()) else {
                continue;
            };
            if stem.chars().count() < rule.min_stem {
                continue;
            }
            let mut out = format!("{stem}{}", rule.replacement);
            if rule.replacement.is_empty() && (rule.suffix == "ing" || rule.suffix == "ed") {
                undouble(&mut out);
            }
            return out;
        }
        word.to_string()
    }
}

fn undouble(word: &mut String) {
    let mut tail = word.chars().rev();
    if let (Some(a), Some(b)) = (tail.next(), tail.next()) {
        if a == b && !"aeioulsz".contains(a) {
            word.pop();
        }
    }
}
