//! Greedy, prefix-beam and lexicon-constrained CTC decoding.

use std::collections::BTreeMap;

use super::{collapse, log_label_prob, Alphabet, FrameProbs, LabelSeq, BLANK};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult<S> {
    pub labels: LabelSeq,
    pub log_prob: S,
}

/// Collapse of the per-frame argmaxes; the score is the log-probability of
/// that single best path.
pub fn greedy_decode<S: Scalar>(probs: &FrameProbs<S>) -> DecodeResult<S> {
    let mut path = Vec::with_capacity(probs.frames());
    let mut score = S::zero();
    for t in 0..probs.frames() {
        let row = probs.row(t);
        let mut best = 0usize;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        score += row[best].ln();
        path.push(best);
    }
    DecodeResult {
        labels: collapse(&path),
        log_prob: score,
    }
}

#[inline]
fn log_add<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (S::one() + (lo - hi).exp()).ln()
}

/// Prefix beam search. Paths are merged by their collapsed prefix, tracking
/// blank-ending and non-blank-ending probability mass separately; the result
/// is sorted by total sequence probability, best first.
pub fn beam_decode<S: Scalar>(
    probs: &FrameProbs<S>,
    beam_width: usize,
) -> Result<Vec<DecodeResult<S>>> {
    if beam_width < 1 {
        return Err(Error::InvalidInput("beam width must be >= 1".into()));
    }
    let ninf = S::neg_infinity();
    // prefix -> (log P(prefix, ends in blank), log P(prefix, ends in label)).
    // BTreeMap keeps iteration order deterministic.
    let mut beam: BTreeMap<Vec<usize>, (S, S)> = BTreeMap::new();
    beam.insert(Vec::new(), (S::zero(), ninf));

    for t in 0..probs.frames() {
        let row = probs.row(t);
        let mut next: BTreeMap<Vec<usize>, (S, S)> = BTreeMap::new();
        for (prefix, &(pb, pnb)) in &beam {
            let total = log_add(pb, pnb);
            // Blank keeps the prefix and moves all mass to the blank bucket.
            let lp_blank = row[BLANK].ln();
            {
                let entry = next.entry(prefix.clone()).or_insert((ninf, ninf));
                entry.0 = log_add(entry.0, total + lp_blank);
            }
            for (k, &p) in row.iter().enumerate().skip(1) {
                let lp = p.ln();
                if lp == ninf {
                    continue;
                }
                if prefix.last() == Some(&k) {
                    // Repeat of the trailing label: staying on the same
                    // character extends the run (no new label), while mass
                    // that already passed a blank starts a genuine repeat.
                    let entry = next.entry(prefix.clone()).or_insert((ninf, ninf));
                    entry.1 = log_add(entry.1, pnb + lp);
                    let mut ext = prefix.clone();
                    ext.push(k);
                    let entry = next.entry(ext).or_insert((ninf, ninf));
                    entry.1 = log_add(entry.1, pb + lp);
                } else {
                    let mut ext = prefix.clone();
                    ext.push(k);
                    let entry = next.entry(ext).or_insert((ninf, ninf));
                    entry.1 = log_add(entry.1, total + lp);
                }
            }
        }
        // Prune to the top `beam_width` prefixes by total mass.
        let mut entries: Vec<(Vec<usize>, (S, S))> = next.into_iter().collect();
        entries.sort_by(|a, b| {
            let ta = log_add(a.1 .0, a.1 .1);
            let tb = log_add(b.1 .0, b.1 .1);
            tb.partial_cmp(&ta)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        entries.truncate(beam_width);
        beam = entries.into_iter().collect();
    }

    let mut results: Vec<DecodeResult<S>> = beam
        .into_iter()
        .map(|(prefix, (pb, pnb))| DecodeResult {
            labels: LabelSeq::new(prefix).expect("prefixes never contain blank"),
            log_prob: log_add(pb, pnb),
        })
        .collect();
    results.sort_by(|a, b| {
        b.log_prob
            .partial_cmp(&a.log_prob)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.labels.cmp(&b.labels))
    });
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconChoice<S> {
    /// Index of the chosen word in the lexicon as passed in.
    pub index: usize,
    pub word: String,
    pub result: DecodeResult<S>,
}

/// Scores every lexicon word by its exact CTC sequence probability (forward
/// recursion) and returns the best; ties break toward the earlier word.
/// Words that cannot be encoded or aligned are skipped; if none remain the
/// distinct no-match error is returned.
pub fn lexicon_decode<S: Scalar>(
    probs: &FrameProbs<S>,
    alphabet: &Alphabet,
    words: &[String],
) -> Result<LexiconChoice<S>> {
    if words.is_empty() {
        return Err(Error::InvalidInput("empty lexicon".into()));
    }
    let mut best: Option<LexiconChoice<S>> = None;
    for (index, word) in words.iter().enumerate() {
        let Ok(labels) = alphabet.encode(word) else {
            continue;
        };
        let Some(log_p) = log_label_prob(probs, &labels) else {
            continue;
        };
        if log_p == S::neg_infinity() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => log_p > b.result.log_prob,
        };
        if better {
            best = Some(LexiconChoice {
                index,
                word: word.clone(),
                result: DecodeResult {
                    labels,
                    log_prob: log_p,
                },
            });
        }
    }
    best.ok_or(Error::NoFeasibleWord)
}
