//! ICDAR-style competition metrics: localization precision/recall/F,
//! word-recognition total edit distance and correctly-recognized-words rate,
//! and end-to-end scoring under per-setting lexicons.
//!
//! Matching is one-to-one and greedy by descending IoU. A detection whose
//! own-area overlap with a don't-care region exceeds 0.5 is ignored rather
//! than counted as a false positive.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{intersection_over_self, polygon_iou, QuadBox};
use crate::lexicon::edit_distance;

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-to-one assignment between ground truth and detections for one image.
#[derive(Debug, Clone, Default)]
pub struct Matching {
    /// `(gt_index, det_index)` pairs, each index appearing at most once.
    pub pairs: Vec<(usize, usize)>,
    /// Don't-care ground truth, excluded from the counts.
    pub ignored_gts: BTreeSet<usize>,
    /// Detections absorbed by don't-care regions, excluded from the counts.
    pub ignored_dets: BTreeSet<usize>,
    pub num_gts: usize,
    pub num_dets: usize,
}

impl Matching {
    pub fn counted_gts(&self) -> usize {
        self.num_gts - self.ignored_gts.len()
    }

    pub fn counted_dets(&self) -> usize {
        self.num_dets - self.ignored_dets.len()
    }
}

/// Greedy matching:
/// 1. detections overlapping a don't-care region by more than half their own
///    area are set aside;
/// 2. don't-care ground truth is set aside;
/// 3. remaining pairs at `IoU >= iou_thresh` are taken one-to-one in order of
///    descending IoU, ties by `(gt_index, det_index)`.
pub fn match_detections(gts: &[QuadBox], dets: &[QuadBox], iou_thresh: f64) -> Result<Matching> {
    if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "iou threshold must be in (0,1], got {iou_thresh}"
        )));
    }
    let mut m = Matching {
        num_gts: gts.len(),
        num_dets: dets.len(),
        ..Matching::default()
    };
    for (gi, gt) in gts.iter().enumerate() {
        if gt.dont_care {
            m.ignored_gts.insert(gi);
        }
    }
    for (di, det) in dets.iter().enumerate() {
        let absorbed = gts
            .iter()
            .filter(|g| g.dont_care)
            .any(|g| intersection_over_self(det, g) > 0.5);
        if absorbed {
            m.ignored_dets.insert(di);
        }
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, gt) in gts.iter().enumerate() {
        if m.ignored_gts.contains(&gi) {
            continue;
        }
        for (di, det) in dets.iter().enumerate() {
            if m.ignored_dets.contains(&di) {
                continue;
            }
            let iou = polygon_iou(gt, det);
            if iou >= iou_thresh {
                candidates.push((iou, gi, di));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut gt_used = vec![false; gts.len()];
    let mut det_used = vec![false; dets.len()];
    for (_, gi, di) in candidates {
        if !gt_used[gi] && !det_used[di] {
            gt_used[gi] = true;
            det_used[di] = true;
            m.pairs.push((gi, di));
        }
    }
    m.pairs.sort_unstable();
    Ok(m)
}

/// Micro-averaged localization scores over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub matched: usize,
    pub counted_gt: usize,
    pub counted_det: usize,
}

/// Sums matches and counts across images before dividing. Empty denominators
/// use the vacuous convention: no counted detections means precision 1, no
/// counted ground truth means recall 1.
pub fn localization_metrics(matchings: &[Matching]) -> LocalizationReport {
    let matched: usize = matchings.iter().map(|m| m.pairs.len()).sum();
    let counted_gt: usize = matchings.iter().map(|m| m.counted_gts()).sum();
    let counted_det: usize = matchings.iter().map(|m| m.counted_dets()).sum();
    let precision = if counted_det == 0 {
        1.0
    } else {
        matched as f64 / counted_det as f64
    };
    let recall = if counted_gt == 0 {
        1.0
    } else {
        matched as f64 / counted_gt as f64
    };
    LocalizationReport {
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        matched,
        counted_gt,
        counted_det,
    }
}

/// Word-recognition scores: total edit distance and exact-match rate, plus
/// the case-insensitive ("upper") variants.
#[derive(Debug, Clone, PartialEq)]
pub struct WordRecognitionReport {
    pub ted: usize,
    pub crw: f64,
    pub ted_upper: usize,
    pub crw_upper: f64,
    pub pairs: usize,
}

pub fn word_metrics(pairs: &[(String, String)]) -> Result<WordRecognitionReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput(
            "word metrics need at least one (gt, prediction) pair".into(),
        ));
    }
    let mut ted = 0usize;
    let mut ted_upper = 0usize;
    let mut exact = 0usize;
    let mut exact_upper = 0usize;
    for (gt, pred) in pairs {
        let d = edit_distance(gt, pred);
        ted += d;
        if d == 0 {
            exact += 1;
        }
        let du = edit_distance(&gt.to_uppercase(), &pred.to_uppercase());
        ted_upper += du;
        if du == 0 {
            exact_upper += 1;
        }
    }
    Ok(WordRecognitionReport {
        ted,
        crw: exact as f64 / pairs.len() as f64,
        ted_upper,
        crw_upper: exact_upper as f64 / pairs.len() as f64,
        pairs: pairs.len(),
    })
}

/// Lexicon regime for end-to-end evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Strong,
    Weak,
    Generic,
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::Strong => "strong",
            Setting::Weak => "weak",
            Setting::Generic => "generic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Setting::Strong),
            "weak" => Ok(Setting::Weak),
            "generic" => Ok(Setting::Generic),
            _ => Err(Error::InvalidInput(format!(
                "unknown setting {s:?} (expected strong|weak|generic)"
            ))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One end-to-end result row.
#[derive(Debug, Clone, PartialEq)]
pub struct EndToEndReport {
    pub setting: Setting,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    pub counted_gt: usize,
    pub counted_det: usize,
}

/// End-to-end scoring for one dataset: a detection is a true positive iff it
/// matches a counted ground-truth box at the IoU threshold *and* its
/// transcription equals the ground truth's, compared uppercase with
/// surrounding whitespace trimmed. The lexicon setting only labels the
/// report; scoring itself is lexicon-independent.
pub fn e2e_metrics(
    images: &[(Vec<QuadBox>, Vec<QuadBox>)],
    setting: Setting,
    iou_thresh: f64,
) -> Result<EndToEndReport> {
    let mut tp = 0usize;
    let mut counted_gt = 0usize;
    let mut counted_det = 0usize;
    for (gts, dets) in images {
        for det in dets {
            if det.transcription.is_none() {
                return Err(Error::InvalidInput(
                    "end-to-end detection without a transcription".into(),
                ));
            }
        }
        let m = match_detections(gts, dets, iou_thresh)?;
        counted_gt += m.counted_gts();
        counted_det += m.counted_dets();
        for (gi, di) in &m.pairs {
            let gt_text = gts[*gi].transcription.as_deref().unwrap_or("");
            let det_text = dets[*di].transcription.as_deref().unwrap_or("");
            if transcriptions_equal(gt_text, det_text) {
                tp += 1;
            }
        }
    }
    let precision = if counted_det == 0 {
        1.0
    } else {
        tp as f64 / counted_det as f64
    };
    let recall = if counted_gt == 0 {
        1.0
    } else {
        tp as f64 / counted_gt as f64
    };
    Ok(EndToEndReport {
        setting,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        true_positives: tp,
        counted_gt,
        counted_det,
    })
}

/// Case-insensitive comparison with surrounding whitespace trimmed;
/// punctuation is kept verbatim.
pub fn transcriptions_equal(a: &str, b: &str) -> bool {
    a.trim().to_uppercase() == b.trim().to_uppercase()
}

/// Machine-readable key-value lines for a report file.
pub fn localization_report_kv(r: &LocalizationReport) -> String {
    format!(
        "precision={:.6}\nrecall={:.6}\nhmean={:.6}\nmatched={}\ncounted_gt={}\ncounted_det={}\n",
        r.precision, r.recall, r.f_measure, r.matched, r.counted_gt, r.counted_det
    )
}

pub fn word_report_kv(r: &WordRecognitionReport) -> String {
    format!(
        "ted={}\ncrw={:.6}\nted_upper={}\ncrw_upper={:.6}\npairs={}\n",
        r.ted, r.crw, r.ted_upper, r.crw_upper, r.pairs
    )
}

pub fn e2e_report_kv(r: &EndToEndReport) -> String {
    format!(
        "setting={}\nprecision={:.6}\nrecall={:.6}\nhmean={:.6}\ntrue_positives={}\ncounted_gt={}\ncounted_det={}\n",
        r.setting, r.precision, r.recall, r.f_measure, r.true_positives, r.counted_gt, r.counted_det
    )
}

/// Normalized total edit distance: each pair contributes
/// `distance / max(len_gt, len_pred, 1)`.
pub fn normalized_ted(pairs: &[(String, String)]) -> f64 {
    pairs
        .iter()
        .map(|(gt, pred)| {
            let d = edit_distance(gt, pred) as f64;
            d / gt.chars().count().max(pred.chars().count()).max(1) as f64
        })
        .sum()
}
