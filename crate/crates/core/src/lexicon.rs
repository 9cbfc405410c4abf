//! Editable word lists and maps shipped with the crate.
//!
//! Map files are UTF-8 `key<TAB>value` lines, list files hold one entry per
//! line. Blank lines and lines starting with `#` are ignored. Every
//! lexicon has a bundled default compiled into the binary; a path
//! overrides it.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDERS: &str = include_str!("../lexicons/placeholders.tsv");
pub const ACRONYMS: &str = include_str!("../lexicons/acronyms.tsv");
pub const EMOJI: &str = include_str!("../lexicons/emoji.tsv");
pub const STOPWORDS: &str = include_str!("../lexicons/stopwords.txt");
pub const LEMMA_RULES: &str = include_str!("../lexicons/lemma_rules.tsv");
pub const GREETINGS: &str = include_str!("../lexicons/greetings.txt");
pub const DISAPPROVAL: &str = include_str!("../lexicons/disapproval.txt");
pub const SENTIMENT_WORDS: &str = include_str!("../lexicons/sentiment_words.tsv");
pub const SENTIMENT_EMOJI: &str = include_str!("../lexicons/sentiment_emoji.tsv");

/// Where a lexicon comes from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LexiconSource {
    #[default]
    Bundled,
    File(PathBuf),
}

impl LexiconSource {
    pub fn read(&self, bundled: &'static str) -> Result<String> {
        match self {
            LexiconSource::Bundled => Ok(bundled.to_string()),
            LexiconSource::File(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e)),
        }
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses `key<TAB>value` lines. Later duplicates win.
pub fn parse_map(text: &str) -> Result<Vec<(String, String)>> {
    content_lines(text)
        .map(|(no, line)| {
            line.split_once('\t')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("lexicon line {no}: expected key<TAB>value")))
        })
        .collect()
}

pub fn parse_list(text: &str) -> Vec<String> {
    content_lines(text).map(|(_, l)| l.trim().to_string()).collect()
}

pub fn load_map(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text)
}

/// Three-way polarity used by the sentiment attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Intermediate,
    Negative,
}

impl Polarity {
    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Intermediate => 1,
            Polarity::Negative => 2,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "pos" => Some(Polarity::Positive),
            "int" | "neu" => Some(Polarity::Intermediate),
            "neg" => Some(Polarity::Negative),
            _ => None,
        }
    }
}

pub fn parse_polarity_map(text: &str) -> Result<HashMap<String, Polarity>> {
    parse_map(text)?
        .into_iter()
        .map(|(k, v)| {
            Polarity::parse(&v)
                .map(|p| (k.to_lowercase(), p))
                .ok_or_else(|| Error::Parse(format!("unknown polarity `{v}` for `{k}`")))
        })
        .collect()
}

/// Lexicons consumed by the heuristic attribute extractor.
#[derive(Clone, Debug)]
pub struct HeuristicLexicons {
    pub greetings: Vec<String>,
    pub disapproval: Vec<String>,
    pub sentiment_words: HashMap<String, Polarity>,
    pub sentiment_emoji: HashMap<String, Polarity>,
}

impl HeuristicLexicons {
    pub fn bundled() -> Self {
        HeuristicLexicons {
            greetings: parse_list(GREETINGS).into_iter().map(|s| s.to_lowercase()).collect(),
            disapproval: parse_list(DISAPPROVAL).into_iter().map(|s| s.to_lowercase()).collect(),
            sentiment_words: parse_polarity_map(SENTIMENT_WORDS).expect("bundled sentiment lexicon"),
            sentiment_emoji: parse_polarity_map(SENTIMENT_EMOJI)
                .expect("bundled emoji lexicon")
                .into_iter()
                .map(|(k, v)| (k.to_uppercase(), v))
                .collect(),
        }
    }
}

impl Default for HeuristicLexicons {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Whole-word phrase match on lowercase text; apostrophes stay inside
/// words so "can't" is one word.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let target: Vec<&str> = phrase.split_whitespace().collect();
    if target.is_empty() {
        return false;
    }
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .collect();
    words.windows(target.len()).any(|w| w == target.as_slice())
}

pub fn stopword_set(text: &str) -> HashSet<String> {
    parse_list(text).into_iter().map(|s| s.to_lowercase()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicons_parse() {
        assert!(parse_map(PLACEHOLDERS).unwrap().len() >= 5);
        assert!(parse_map(ACRONYMS).unwrap().iter().any(|(k, _)| k == "imo"));
        assert!(parse_map(EMOJI).unwrap().iter().any(|(k, _)| k == ":("));
        assert!(stopword_set(STOPWORDS).contains("the"));
        let h = HeuristicLexicons::bundled();
        assert_eq!(h.sentiment_words["error"], Polarity::Negative);
        assert_eq!(h.sentiment_emoji["[EMOJI_SAD]"], Polarity::Negative);
        assert!(h.greetings.contains(&"good morning".to_string()));
    }

    #[test]
    fn phrases_match_whole_words() {
        assert!(contains_phrase("well, good morning all", "good morning"));
        assert!(!contains_phrase("goodmorning", "good morning"));
        assert!(contains_phrase("it can't work here", "can't work"));
        assert!(!contains_phrase("nothing", "no"));
        assert!(!contains_phrase("anything", ""));
    }

    #[test]
    fn map_line_without_tab_is_reported() {
        let err = parse_map("# c\nok\tyes\nbroken line\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn stopword_list_keeps_question_words_and_negation() {
        let s = stopword_set(STOPWORDS);
        for w in ["what", "why", "when", "who", "which", "how", "not", "no"] {
            assert!(!s.contains(w), "{w} must survive stopword removal");
        }
    }
}
