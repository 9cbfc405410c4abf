use super::lm::{ngram_perplexity, BigramLm};
use super::{ChatLog, PreprocessConfig, Utterance};

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} {b}"),
    }
}

/// Merges adjacent same-author messages when the joined text reads better
/// under `lm` than either part and beats the configured threshold.
/// Works left to right; a merged message may absorb its next neighbour.
pub fn merge_broken_utterances(log: &ChatLog, cfg: &PreprocessConfig, lm: &BigramLm) -> ChatLog {
    let gap_ms = cfg.merge_time_gap_max.saturating_mul(1000) as i64;
    let mut out: Vec<Utterance> = Vec::with_capacity(log.len());
    // Time of the latest constituent of the last output utterance.
    let mut last_time = i64::MIN;
    for u in &log.utterances {
        if let Some(prev) = out.last_mut() {
            if prev.author_id == u.author_id && u.time.saturating_sub(last_time) <= gap_ms {
                let joined = join(&prev.clean_text, &u.clean_text);
                let pp = ngram_perplexity(&joined, lm);
                let parts = ngram_perplexity(&prev.clean_text, lm).min(ngram_perplexity(&u.clean_text, lm));
                if pp < cfg.perplexity_threshold && pp < parts {
                    prev.raw_text = join(&prev.raw_text, &u.raw_text);
                    prev.clean_text = joined;
                    prev.tokens.extend(u.tokens.iter().cloned());
                    prev.placeholders.merge(&u.placeholders);
                    last_time = u.time;
                    continue;
                }
            }
        }
        out.push(u.clone());
        last_time = u.time;
    }
    let mut merged = ChatLog {
        community_id: log.community_id.clone(),
        utterances: out,
    };
    merged.reindex();
    merged
}
