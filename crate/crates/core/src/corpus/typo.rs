use std::collections::HashMap;

use super::Utterance;

fn edits1(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    for i in 0..chars.len() {
        let mut w = chars.clone();
        w.remove(i);
        out.push(w.iter().collect());
    }
    for i in 0..chars.len().saturating_sub(1) {
        let mut w = chars.clone();
        w.swap(i, i + 1);
        out.push(w.iter().collect());
    }
    for i in 0..=chars.len() {
        for c in 'a'..='z' {
            if i < chars.len() {
                let mut w = chars.clone();
                w[i] = c;
                out.push(w.iter().collect());
            }
            let mut w = chars.clone();
            w.insert(i, c);
            out.push(w.iter().collect());
        }
    }
    out
}

/// Replaces rare tokens with their most frequent edit-distance-1
/// neighbour in the log's vocabulary. Only lowercase ASCII words of
/// four or more letters are touched; ties go to the smaller string.
/// Returns the number of tokens rewritten.
pub fn correct_typos(utterances: &mut [Utterance], min_count: usize) -> usize {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for u in utterances.iter() {
        for t in &u.tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    let mut fixes: HashMap<String, String> = HashMap::new();
    for (word, &n) in &counts {
        if n >= min_count || word.len() < 4 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
            continue;
        }
        let best = edits1(word)
            .into_iter()
            .filter_map(|cand| counts.get(&cand).filter(|&&c| c >= min_count).map(|&c| (c, cand)))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        if let Some((_, cand)) = best {
            fixes.insert(word.clone(), cand);
        }
    }
    let mut changed = 0;
    for u in utterances.iter_mut() {
        for t in &mut u.tokens {
            if let Some(fix) = fixes.get(t.as_str()) {
                *t = fix.clone();
                changed += 1;
            }
        }
    }
    changed
}
