use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use super::lemma::Lemmatizer;
use super::{PlaceholderCounts, PlaceholderKind, PreprocessConfig, RawMessage, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{self, parse_map, stopword_set};

pub(crate) fn tag_regex() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"\[[A-Z][A-Z0-9_]*\]").unwrap())
}

fn token_regex() -> &'static Regex {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    TOKEN.get_or_init(|| {
        Regex::new(r"\[[A-Z][A-Z0-9_]*\]|[\p{L}\p{N}_]+(?:['’][\p{L}\p{N}]+)*|[^\s\p{L}\p{N}_]").unwrap()
    })
}

/// Splits a clean text into surface tokens: placeholder tags, words and
/// single punctuation characters.
pub fn tokenize(text: &str) -> Vec<&str> {
    token_regex().find_iter(text).map(|m| m.as_str()).collect()
}

pub fn is_tag(token: &str) -> bool {
    tag_regex().find(token).is_some_and(|m| m.len() == token.len())
}

fn is_word(token: &str) -> bool {
    token.chars().any(|c| c.is_alphanumeric())
}

/// Applies `f` to the stretches of `text` between placeholder tags.
fn map_outside_tags(text: &str, mut f: impl FnMut(&str) -> String) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in tag_regex().find_iter(text) {
        out.push_str(&f(&text[last..m.start()]));
        out.push_str(m.as_str());
        last = m.end();
    }
    out.push_str(&f(&text[last..]));
    out
}

/// A compiled [`PreprocessConfig`]. Building it loads and compiles every
/// lexicon once; [`Preprocessor::preprocess`] is then a pure function.
#[derive(Debug)]
pub struct Preprocessor {
    placeholders: Vec<(PlaceholderKind, Regex)>,
    acronym_re: Option<Regex>,
    acronyms: std::collections::HashMap<String, String>,
    /// Whitespace-delimited ASCII emoticons.
    emoticons: std::collections::HashMap<String, String>,
    /// Non-ASCII emoji, replaced wherever they occur (longest first).
    emoji: Vec<(String, String)>,
    stopwords: HashSet<String>,
    lemmatizer: Lemmatizer,
}

impl Preprocessor {
    pub fn new(cfg: &PreprocessConfig) -> Result<Self> {
        cfg.validate()?;
        let mut placeholders = Vec::new();
        for (name, pattern) in parse_map(&cfg.placeholders.read(lexicon::PLACEHOLDERS)?)? {
            let kind = PlaceholderKind::from_name(&name)
                .ok_or_else(|| Error::Config(format!("unknown placeholder `{name}`")))?;
            let re = Regex::new(&pattern).map_err(|e| Error::Config(format!("placeholder {name}: {e}")))?;
            placeholders.push((kind, re));
        }

        let acronyms: std::collections::HashMap<String, String> = parse_map(&cfg.acronyms.read(lexicon::ACRONYMS)?)?
            .into_iter()
            .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string()))
            .collect();
        let acronym_re = if acronyms.is_empty() {
            None
        } else {
            let mut keys: Vec<&String> = acronyms.keys().collect();
            keys.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            let alt = keys.iter().map(|k| regex::escape(k)).collect::<Vec<_>>().join("|");
            Some(Regex::new(&format!(r"(?i)\b(?:{alt})\b")).map_err(|e| Error::Config(e.to_string()))?)
        };

        let mut emoticons = std::collections::HashMap::new();
        let mut emoji = Vec::new();
        for (k, v) in parse_map(&cfg.emoji.read(lexicon::EMOJI)?)? {
            if !is_tag(v.trim()) {
                return Err(Error::Config(format!("emoji tag `{v}` must look like [NAME]")));
            }
            if k.is_ascii() {
                emoticons.insert(k, v.trim().to_string());
            } else {
                emoji.push((k, v.trim().to_string()));
            }
        }
        emoji.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));

        Ok(Preprocessor {
            placeholders,
            acronym_re,
            acronyms,
            emoticons,
            emoji,
            stopwords: stopword_set(&cfg.stopwords.read(lexicon::STOPWORDS)?),
            lemmatizer: Lemmatizer::parse(&cfg.lemma_rules.read(lexicon::LEMMA_RULES)?)?,
        })
    }

    /// Produces clean text and placeholder hits.
    pub fn clean(&self, raw: &str) -> (String, PlaceholderCounts) {
        let mut hits = PlaceholderCounts::default();
        let mut text = raw.to_string();
        for (kind, re) in &self.placeholders {
            let tag = kind.tag();
            let replaced = map_outside_tags(&text, |seg| {
                re.replace_all(seg, |_: &regex::Captures| {
                    hits.add(*kind);
                    format!(" {tag} ")
                })
                .into_owned()
            });
            text = replaced;
        }

        if let Some(re) = &self.acronym_re {
            text = map_outside_tags(&text, |seg| {
                re.replace_all(seg, |c: &regex::Captures| self.acronyms[&c[0].to_lowercase()].clone())
                    .into_owned()
            });
        }

        for (k, tag) in &self.emoji {
            if text.contains(k.as_str()) {
                text = text.replace(k.as_str(), &format!(" {tag} "));
            }
        }
        if !self.emoticons.is_empty() {
            text = text
                .split_whitespace()
                .map(|w| self.emoticons.get(w).map(String::as_str).unwrap_or(w))
                .collect::<Vec<_>>()
                .join(" ");
        }

        let lowered = map_outside_tags(&text, |seg| seg.to_lowercase());
        (lowered.split_whitespace().collect::<Vec<_>>().join(" "), hits)
    }

    /// Normalized tokens of a clean text: lemmatized, stopwords removed,
    /// punctuation and tags kept.
    pub fn tokens(&self, clean_text: &str) -> Vec<String> {
        tokenize(clean_text)
            .into_iter()
            .filter_map(|t| {
                if is_tag(t) || !is_word(t) {
                    return Some(t.to_string());
                }
                if self.stopwords.contains(t) {
                    return None;
                }
                let lemma = self.lemmatizer.lemma(t);
                (!self.stopwords.contains(&lemma)).then_some(lemma)
            })
            .collect()
    }

    pub fn preprocess(&self, raw: &RawMessage, index: usize) -> Utterance {
        let (clean_text, placeholders) = self.clean(&raw.text);
        let tokens = self.tokens(&clean_text);
        Utterance {
            index,
            time: raw.time,
            author_id: raw.author_id.clone(),
            raw_text: raw.text.clone(),
            clean_text,
            tokens,
            placeholders,
        }
    }
}

/// One-shot form of [`Preprocessor::preprocess`]; compile a
/// [`Preprocessor`] when handling more than a few messages.
pub fn preprocess_utterance(raw: &RawMessage, cfg: &PreprocessConfig) -> Result<Utterance> {
    Ok(Preprocessor::new(cfg)?.preprocess(raw, 0))
}
