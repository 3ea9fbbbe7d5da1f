//! Connectionist Temporal Classification: the path-collapse map, the
//! forward-backward loss and its gradient in log space, and greedy, prefix
//! beam, and lexicon-constrained decoders.
//!
//! Class 0 is always the blank; real characters occupy classes `1..K`.

mod decode;
mod loss;

pub use decode::{beam_decode, greedy_decode, lexicon_decode, DecodeResult, LexiconChoice};
pub use loss::{ctc_gradient, ctc_loss, log_label_prob, CtcAlphaBeta};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The CTC blank class index.
pub const BLANK: usize = 0;

/// An ordered character set; class `k >= 1` maps to `chars[k-1]`.
#[derive(Debug, Clone)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let chars: Vec<char> = chars.into_iter().collect();
        let mut index = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i + 1).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate character {c:?} in alphabet"
                )));
            }
        }
        Ok(Alphabet { chars, index })
    }

    /// The 36 case-insensitive alphanumerics `a..z`, `0..9`.
    pub fn alnum36() -> Self {
        Alphabet::new(('a'..='z').chain('0'..='9')).expect("static alphabet")
    }

    /// Number of classes including the blank.
    pub fn num_classes(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn class_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn char_of(&self, class: usize) -> Option<char> {
        if class == BLANK {
            None
        } else {
            self.chars.get(class - 1).copied()
        }
    }

    /// Encodes a string whose characters are all in the alphabet.
    pub fn encode(&self, s: &str) -> Result<LabelSeq> {
        let mut v = Vec::with_capacity(s.chars().count());
        for c in s.chars() {
            match self.class_of(c) {
                Some(k) => v.push(k),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "character {c:?} not in alphabet"
                    )))
                }
            }
        }
        LabelSeq::new(v)
    }

    pub fn decode(&self, labels: &LabelSeq) -> String {
        labels
            .as_slice()
            .iter()
            .filter_map(|&k| self.char_of(k))
            .collect()
    }
}

/// A blank-free sequence of character classes: the collapsed form CTC targets
/// and decoders work with.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LabelSeq(Vec<usize>);

impl LabelSeq {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.contains(&BLANK) {
            return Err(Error::InvalidInput(
                "label sequence must not contain the blank".into(),
            ));
        }
        Ok(LabelSeq(labels))
    }

    pub fn empty() -> Self {
        LabelSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Shortest path length that can emit this sequence: one frame per label
    /// plus a separating blank between adjacent repeats.
    pub fn min_frames(&self) -> usize {
        let repeats = self.0.windows(2).filter(|w| w[0] == w[1]).count();
        self.0.len() + repeats
    }

    /// The blank-augmented form `blank l1 blank l2 ... blank` of length 2L+1.
    pub fn augmented(&self) -> Vec<usize> {
        let mut aug = Vec::with_capacity(2 * self.0.len() + 1);
        aug.push(BLANK);
        for &l in &self.0 {
            aug.push(l);
            aug.push(BLANK);
        }
        aug
    }
}

/// Merges consecutive repeats, then removes blanks (the standard CTC collapse).
pub fn collapse(path: &[usize]) -> LabelSeq {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    LabelSeq(out)
}

/// A `T x K` matrix of per-frame class probabilities, blank included.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProbs<S> {
    t: usize,
    k: usize,
    data: Vec<S>,
}

impl<S: Scalar> FrameProbs<S> {
    /// Validates that every row is a distribution: entries in `[0,1]` and
    /// summing to 1 (within a scalar-dependent tolerance, 1e-9 for `f64`).
    pub fn new(t: usize, k: usize, data: Vec<S>) -> Result<Self> {
        if t == 0 || k < 2 {
            return Err(Error::InvalidInput(format!(
                "frame matrix needs T >= 1 and K >= 2, got T={t} K={k}"
            )));
        }
        if data.len() != t * k {
            return Err(Error::ShapeMismatch(format!(
                "expected {t}x{k} = {} values, got {}",
                t * k,
                data.len()
            )));
        }
        let tol = Self::row_tolerance(k);
        for (r, row) in data.chunks(k).enumerate() {
            let mut sum = S::zero();
            for &v in row {
                if !(v >= -tol && v <= S::one() + tol) {
                    return Err(Error::InvalidInput(format!(
                        "probability out of range at frame {r}: {v}"
                    )));
                }
                sum += v;
            }
            if (sum - S::one()).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "frame {r} sums to {sum}, not 1"
                )));
            }
        }
        Ok(FrameProbs { t, k, data })
    }

    fn row_tolerance(k: usize) -> S {
        let eps_based = S::epsilon() * S::from_f64_lossy(64.0 * k as f64);
        eps_based.max(S::from_f64_lossy(1e-9))
    }

    /// Skips validation; for gradient checks that perturb single entries.
    pub fn from_raw_unchecked(t: usize, k: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), t * k);
        FrameProbs { t, k, data }
    }

    pub fn frames(&self) -> usize {
        self.t
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[S] {
        &self.data[t * self.k..(t + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> S {
        self.data[t * self.k + k]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    /// Plain text dump: first line `T K`, then one row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.t, self.k);
        for t in 0..self.t {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "empty frame matrix".into(),
            })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected 'T K' header, got {header:?}"),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad dimension {s:?}"),
            })
        };
        let t = parse_dim(dims[0])?;
        let k = parse_dim(dims[1])?;
        let mut data = Vec::with_capacity(t * k);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad probability {tok:?}"),
                })?;
                data.push(S::from_f64_lossy(v));
            }
        }
        FrameProbs::new(t, k, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[usize]) -> LabelSeq {
        LabelSeq::new(v.to_vec()).unwrap()
    }

    #[test]
    fn collapse_rules() {
        assert_eq!(collapse(&[0, 0, 0]), LabelSeq::empty());
        // [a, a, blank, a, b] -> "aab"
        assert_eq!(collapse(&[1, 1, 0, 1, 2]), seq(&[1, 1, 2]));
        // [a, blank, blank, a] -> "aa"
        assert_eq!(collapse(&[1, 0, 0, 1]), seq(&[1, 1]));
    }

    #[test]
    fn collapse_fixes_blank_free_repeat_free_sequences() {
        let s = seq(&[1, 2, 1, 3]);
        assert_eq!(collapse(s.as_slice()), s);
    }

    #[test]
    fn min_frames_counts_repeats() {
        assert_eq!(LabelSeq::empty().min_frames(), 0);
        assert_eq!(seq(&[1, 2]).min_frames(), 2);
        assert_eq!(seq(&[1, 1]).min_frames(), 3);
        assert_eq!(seq(&[1, 1, 1]).min_frames(), 5);
    }

    #[test]
    fn label_seq_rejects_blank() {
        assert!(LabelSeq::new(vec![1, 0, 2]).is_err());
    }

    #[test]
    fn alphabet_round_trip() {
        let a = Alphabet::alnum36();
        assert_eq!(a.num_classes(), 37);
        let l = a.encode("stop9").unwrap();
        assert_eq!(a.decode(&l), "stop9");
        assert!(a.encode("Stop").is_err());
    }

    #[test]
    fn frame_probs_validation() {
        assert!(FrameProbs::new(1, 2, vec![0.5, 0.5]).is_ok());
        assert!(FrameProbs::<f64>::new(1, 2, vec![0.6, 0.6]).is_err());
        assert!(FrameProbs::<f64>::new(1, 2, vec![1.2, -0.2]).is_err());
        assert!(FrameProbs::<f64>::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn frame_probs_text_round_trip() {
        let p = FrameProbs::new(2, 3, vec![0.2, 0.3, 0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        let q = FrameProbs::<f64>::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
    }
}
