//! Pairwise reply-link features.
//!
//! Layout (with the default 14 time-gap boundaries, 77 values):
//!
//! | offset | width | feature |
//! |---|---|---|
//! | 0 | 1 | self link |
//! | 1 | G | time gap one-hot |
//! | +0 | 10 | utterance distance one-hot (1,2,3,4,5,6-7,8-10,11-15,16-25,26+) |
//! | +10 | 1 | log distance, scaled to the lookback |
//! | +11 | 1 | log time gap, scaled to one day |
//! | +12 | 1 | same author |
//! | +13 | 1 | child mentions parent author |
//! | +14 | 1 | parent mentions child author |
//! | +15 | 6 | shared content tokens one-hot (0,1,2,3,4-5,6+) |
//! | +21 | 1 | Jaccard overlap of content tokens |
//! | +22 | 5 | parent length one-hot (0-2,3-5,6-10,11-20,21+) |
//! | +27 | 1 | parent has "?" |
//! | +28 | 1 | parent has "?" and child does not |
//! | +29 | 1 | both have "?" |
//! | +30 | 1 | same hour of day |
//! | +31 | 1 | parent is its author's latest message before child |
//! | +32 | 1 | parent is its author's first message in the lookback |
//! | +33 | 1 | parent has a greeting |
//! | +34 | 1 | parent mentions someone |
//! | +35 | 1 | shared placeholder tag |
//! | +36 | 1 | someone between mentioned the parent author |
//! | +37 | 1 | messages by parent author in between, scaled |
//! | +38 | 1 | messages by child author in between, scaled |
//! | +39 | 1 | parent author is the latest other speaker before child |
//! | +40 | 5 | child length one-hot |
//! | +45 | 1 | child has "?" |
//! | +46 | 1 | child mentions someone |
//! | +47 | 1 | child has a greeting |
//! | +48 | 1 | child author is new in the lookback |
//! | +49 | 4 | child author's previous message gap (none, <1m, <10m, later) |
//! | +53 | 1 | child thanks someone |
//! | +54 | 2 | child has [CODE], child has [URL] |
//! | +56 | 1 | distinct speakers in the lookback, scaled |
//! | +57 | 4 | child hour quarter of day |
//!
//! Pairwise features (offsets 1 to +39) are zero for the self link; child
//! features are always filled.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_tag, ChatLog, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{contains_phrase, HeuristicLexicons};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFeatureConfig {
    /// Maximum `child - parent` distance considered.
    pub lookback: usize,
    /// Upper bounds, in seconds, of the time-gap buckets; one more bucket
    /// catches everything above the last bound.
    pub gap_boundaries_secs: Vec<u64>,
}

impl Default for LinkFeatureConfig {
    fn default() -> Self {
        LinkFeatureConfig {
            lookback: 50,
            gap_boundaries_secs: vec![1, 5, 10, 20, 30, 45, 60, 90, 120, 180, 300, 600, 1800, 3600],
        }
    }
}

const FIXED_WIDTH: usize = 62;

impl LinkFeatureConfig {
    pub fn dim(&self) -> usize {
        FIXED_WIDTH + self.gap_boundaries_secs.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 {
            return Err(Error::Config("link lookback must be >= 1".into()));
        }
        if self.gap_boundaries_secs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("gap boundaries must be strictly increasing".into()));
        }
        Ok(())
    }
}

fn mention_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@([\p{L}\p{N}_.\-]+)").unwrap())
}

const THANKS: [&str; 4] = ["thanks", "thank", "thx", "ty"];

struct UttInfo {
    content: HashSet<String>,
    mentions: HashSet<String>,
    question: bool,
    greeting: bool,
    thanks: bool,
    code: bool,
    url: bool,
    tags: HashSet<String>,
    hour: u32,
    author: usize,
}

/// Per-log precomputation shared by every link query on that log.
pub struct LinkContext<'a> {
    log: &'a ChatLog,
    cfg: LinkFeatureConfig,
    info: Vec<UttInfo>,
    author_names: Vec<String>,
    /// Previous message index by the same author.
    prev_same_author: Vec<Option<usize>>,
}

impl<'a> LinkContext<'a> {
    pub fn new(log: &'a ChatLog, cfg: &LinkFeatureConfig, lexicons: &HeuristicLexicons) -> Self {
        let mut author_ids: HashMap<&str, usize> = HashMap::new();
        let mut author_names = Vec::new();
        let mut last_by_author: HashMap<usize, usize> = HashMap::new();
        let mut prev_same_author = Vec::with_capacity(log.len());
        let info = log
            .utterances
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let next = author_ids.len();
                let author = *author_ids.entry(u.author_id.as_str()).or_insert_with(|| {
                    author_names.push(u.author_id.to_lowercase());
                    next
                });
                prev_same_author.push(last_by_author.insert(author, i));
                utt_info(u, author, lexicons)
            })
            .collect();
        LinkContext {
            log,
            cfg: cfg.clone(),
            info,
            author_names,
            prev_same_author,
        }
    }

    pub fn log(&self) -> &ChatLog {
        self.log
    }

    pub fn config(&self) -> &LinkFeatureConfig {
        &self.cfg
    }

    fn mentions_author(&self, who: usize, author: usize) -> bool {
        self.info[who].mentions.contains(&self.author_names[self.info[author].author])
    }

    /// Features for linking `child` to `parent` (`None` = starts a new
    /// dialog).
    pub fn features(&self, child: usize, parent: Option<usize>) -> Result<Vec<f64>> {
        let n = self.log.len();
        if child >= n {
            return Err(Error::Contract(format!("child {child} outside a log of {n}")));
        }
        if let Some(p) = parent {
            if p >= child || child - p > self.cfg.lookback {
                return Err(Error::Contract(format!(
                    "parent {p} is not within the {} messages before {child}",
                    self.cfg.lookback
                )));
            }
        }
        let mut f = vec![0.0; self.cfg.dim()];
        let gaps = self.cfg.gap_boundaries_secs.len() + 1;
        let base = 1 + gaps;
        let c = &self.info[child];
        let cu = &self.log.utterances[child];

        match parent {
            None => f[0] = 1.0,
            Some(p) => {
                let pi = &self.info[p];
                let pu = &self.log.utterances[p];
                let gap_s = (cu.time - pu.time).max(0) as f64 / 1000.0;
                let bucket = self
                    .cfg
                    .gap_boundaries_secs
                    .iter()
                    .position(|&b| gap_s <= b as f64)
                    .unwrap_or(gaps - 1);
                f[1 + bucket] = 1.0;

                let dist = child - p;
                f[base + distance_bucket(dist)] = 1.0;
                f[base + 10] = (dist as f64).ln_1p() / (self.cfg.lookback as f64).ln_1p();
                f[base + 11] = (gap_s.ln_1p() / 86_400f64.ln_1p()).min(1.0);
                f[base + 12] = flag(pi.author == c.author);
                f[base + 13] = flag(self.mentions_author(child, p));
                f[base + 14] = flag(self.mentions_author(p, child));
                let shared = pi.content.intersection(&c.content).count();
                f[base + 15 + shared_bucket(shared)] = 1.0;
                let union = pi.content.union(&c.content).count();
                f[base + 21] = if union == 0 { 0.0 } else { shared as f64 / union as f64 };
                f[base + 22 + length_bucket(pi.content.len())] = 1.0;
                f[base + 27] = flag(pi.question);
                f[base + 28] = flag(pi.question && !c.question);
                f[base + 29] = flag(pi.question && c.question);
                f[base + 30] = flag(pi.hour == c.hour);
                let between = p + 1..child;
                f[base + 31] = flag(between.clone().all(|j| self.info[j].author != pi.author));
                let window_start = child.saturating_sub(self.cfg.lookback);
                f[base + 32] = flag(self.prev_same_author[p].is_none_or(|q| q < window_start));
                f[base + 33] = flag(pi.greeting);
                f[base + 34] = flag(!pi.mentions.is_empty());
                f[base + 35] = flag(pi.tags.intersection(&c.tags).next().is_some());
                f[base + 36] = flag(between.clone().any(|j| self.mentions_author(j, p)));
                let scale = self.cfg.lookback as f64;
                f[base + 37] = between.clone().filter(|&j| self.info[j].author == pi.author).count() as f64 / scale;
                f[base + 38] = between.clone().filter(|&j| self.info[j].author == c.author).count() as f64 / scale;
                let latest_other = (window_start..child).rev().find(|&j| self.info[j].author != c.author);
                f[base + 39] = flag(latest_other.is_some_and(|j| self.info[j].author == pi.author));
            }
        }

        let cb = base + 40;
        f[cb + length_bucket(c.content.len())] = 1.0;
        f[cb + 5] = flag(c.question);
        f[cb + 6] = flag(!c.mentions.is_empty());
        f[cb + 7] = flag(c.greeting);
        let window_start = child.saturating_sub(self.cfg.lookback);
        let prev = self.prev_same_author[child].filter(|&q| q >= window_start);
        f[cb + 8] = flag(prev.is_none());
        let prev_bucket = match prev {
            None => 0,
            Some(q) => {
                let gap = (cu.time - self.log.utterances[q].time).max(0);
                if gap < 60_000 {
                    1
                } else if gap < 600_000 {
                    2
                } else {
                    3
                }
            }
        };
        f[cb + 9 + prev_bucket] = 1.0;
        f[cb + 13] = flag(c.thanks);
        f[cb + 14] = flag(c.code);
        f[cb + 15] = flag(c.url);
        let speakers: HashSet<usize> = (window_start..child).map(|j| self.info[j].author).collect();
        f[cb + 16] = speakers.len() as f64 / self.cfg.lookback as f64;
        f[cb + 17 + (c.hour / 6) as usize] = 1.0;
        Ok(f)
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn distance_bucket(d: usize) -> usize {
    match d {
        0 | 1 => 0,
        2..=5 => d - 1,
        6..=7 => 5,
        8..=10 => 6,
        11..=15 => 7,
        16..=25 => 8,
        _ => 9,
    }
}

fn shared_bucket(n: usize) -> usize {
    match n {
        0..=3 => n,
        4..=5 => 4,
        _ => 5,
    }
}

fn length_bucket(n: usize) -> usize {
    match n {
        0..=2 => 0,
        3..=5 => 1,
        6..=10 => 2,
        11..=20 => 3,
        _ => 4,
    }
}

fn utt_info(u: &Utterance, author: usize, lexicons: &HeuristicLexicons) -> UttInfo {
    let content = u
        .tokens
        .iter()
        .filter(|t| !is_tag(t) && t.chars().any(|c| c.is_alphanumeric()))
        .cloned()
        .collect();
    let tags: HashSet<String> = u.tokens.iter().filter(|t| is_tag(t)).cloned().collect();
    let mentions = mention_regex()
        .captures_iter(&u.raw_text)
        .map(|c| c[1].trim_end_matches(['.', '-']).to_lowercase())
        .collect();
    let hour = ((u.time / 3_600_000) % 24) as u32;
    UttInfo {
        content,
        mentions,
        question: u.clean_text.contains('?'),
        greeting: lexicons.greetings.iter().any(|g| contains_phrase(&u.clean_text, g)),
        thanks: THANKS.iter().any(|t| contains_phrase(&u.clean_text, t)),
        code: tags.contains("[CODE]"),
        url: tags.contains("[URL]"),
        tags,
        hour,
        author,
    }
}
