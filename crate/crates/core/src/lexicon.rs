//! Dictionary-based error correction: Levenshtein distance over a BK-tree.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Levenshtein distance with unit insert/delete/substitute costs, computed
/// over Unicode code points.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone)]
struct BkNode {
    /// Index into the lexicon's word table.
    word_idx: usize,
    /// Children keyed by edit distance to this node's word.
    children: Vec<(usize, usize)>,
}

/// A word list with a BK-tree index for pruned nearest-word queries.
///
/// Duplicates (after optional case folding) are collapsed to their first
/// occurrence, so tie-breaking by lexicon order is well defined.
#[derive(Debug, Clone)]
pub struct Lexicon {
    /// Original-case words, first occurrence order.
    words: Vec<String>,
    /// Folded forms aligned with `words`; the strings the metric runs on.
    folded: Vec<String>,
    fold_case: bool,
    nodes: Vec<BkNode>,
}

impl Lexicon {
    /// Builds the index. With `fold_case`, matching is done on the lowercased
    /// forms while [`Lexicon::word`] still returns the original spelling.
    pub fn build<I, T>(words: I, fold_case: bool) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut lex = Lexicon {
            words: Vec::new(),
            folded: Vec::new(),
            fold_case,
            nodes: Vec::new(),
        };
        let mut seen: HashMap<String, ()> = HashMap::new();
        for w in words {
            let w = w.as_ref();
            let folded = if fold_case { w.to_lowercase() } else { w.to_string() };
            if seen.insert(folded.clone(), ()).is_some() {
                continue;
            }
            lex.insert(w.to_string(), folded);
        }
        lex
    }

    fn insert(&mut self, word: String, folded: String) {
        let word_idx = self.words.len();
        self.words.push(word);
        self.folded.push(folded);
        let node = BkNode {
            word_idx,
            children: Vec::new(),
        };
        if self.nodes.is_empty() {
            self.nodes.push(node);
            return;
        }
        let mut at = 0usize;
        loop {
            let d = edit_distance(&self.folded[word_idx], &self.folded[self.nodes[at].word_idx]);
            // The builder deduplicates, so d >= 1 here.
            match self.nodes[at].children.iter().find(|(dist, _)| *dist == d) {
                Some(&(_, child)) => at = child,
                None => {
                    let new_idx = self.nodes.len();
                    self.nodes.push(node);
                    self.nodes[at].children.push((d, new_idx));
                    return;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn fold_case(&self) -> bool {
        self.fold_case
    }

    pub fn fold(&self, s: &str) -> String {
        if self.fold_case {
            s.to_lowercase()
        } else {
            s.to_string()
        }
    }

    /// All lexicon words within edit distance `max_d` of `query` (which is
    /// folded first), ascending by `(distance, lexicon order)`. The BK-tree
    /// prunes subtrees via the triangle inequality; results equal a linear
    /// scan exactly.
    pub fn query(&self, query: &str, max_d: usize) -> Vec<(String, usize)> {
        let folded = self.fold(query);
        let mut hits: Vec<(usize, usize)> = Vec::new(); // (word_idx, dist)
        if !self.nodes.is_empty() {
            let mut stack = vec![0usize];
            while let Some(at) = stack.pop() {
                let node = &self.nodes[at];
                let d = edit_distance(&folded, &self.folded[node.word_idx]);
                if d <= max_d {
                    hits.push((node.word_idx, d));
                }
                for &(edge, child) in &node.children {
                    // |d - edge| <= dist(query, child word) by the metric
                    // property, so subtrees outside the band cannot match.
                    if edge + max_d >= d && edge <= d + max_d {
                        stack.push(child);
                    }
                }
            }
        }
        hits.sort_by_key(|&(idx, d)| (d, idx));
        hits.into_iter()
            .map(|(idx, d)| (self.words[idx].clone(), d))
            .collect()
    }
}

/// When a correction is accepted: the nearest word's distance, normalized by
/// the longer of the two strings, must not exceed `max_norm_dist`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionPolicy {
    pub max_norm_dist: f64,
}

impl Default for CorrectionPolicy {
    fn default() -> Self {
        CorrectionPolicy { max_norm_dist: 0.4 }
    }
}

impl CorrectionPolicy {
    pub fn new(max_norm_dist: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&max_norm_dist) {
            return Err(Error::InvalidInput(format!(
                "max_norm_dist must be in [0,1], got {max_norm_dist}"
            )));
        }
        Ok(CorrectionPolicy { max_norm_dist })
    }
}

/// Replaces `raw` by the nearest lexicon word, provided that word passes the
/// normalized-distance gate; otherwise `raw` comes back unchanged. Ties at
/// equal distance break toward the earlier lexicon word, and the chosen word
/// is returned in its original lexicon spelling.
pub fn correct(raw: &str, lex: &Lexicon, policy: &CorrectionPolicy) -> String {
    if lex.is_empty() {
        return raw.to_string();
    }
    let folded = lex.fold(raw);
    let raw_len = folded.chars().count();
    // Any word beyond this radius necessarily fails the gate
    // (len_word <= len_raw + dist, so dist <= q*len_raw/(1-q) for q < 1),
    // which lets the BK-tree query bound the search.
    let q = policy.max_norm_dist;
    let radius = if q >= 1.0 {
        raw_len + lex.words().iter().map(|w| w.chars().count()).max().unwrap_or(0)
    } else {
        (q * raw_len as f64 / (1.0 - q)).floor() as usize
    };
    let Some((word, dist)) = lex.query(&folded, radius).into_iter().next() else {
        return raw.to_string();
    };
    let denom = raw_len.max(lex.fold(&word).chars().count()).max(1);
    if dist as f64 / denom as f64 <= q {
        word
    } else {
        raw.to_string()
    }
}
