//! Ground-truth and result files in ICDAR conventions, quad rasterization to
//! training masks, vocabulary loading for the three end-to-end settings, and
//! the synthetic data generator.
//!
//! Directory layout: `gt/gt_«id».txt`, `res/res_«id».txt`,
//! `vocab/strong/«id».txt`, `vocab/weak.txt`, `vocab/generic.txt`.

pub mod font;
pub mod pnm;
mod synth;

pub use synth::{
    default_words, synth_generate, synth_word_images, SynthConfig, SynthOutput, WordSynthConfig,
};

use std::path::Path;

use crate::detector::BinaryMask;
use crate::error::{Error, Result};
use crate::eval::Setting;
use crate::geometry::{QuadBox, Vec2};
use crate::lexicon::Lexicon;

/// All annotated boxes of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    pub image_id: String,
    pub boxes: Vec<QuadBox>,
}

fn strip_bom(text: &str) -> &str {
    text.strip_prefix('\u{feff}').unwrap_or(text)
}

fn parse_box_line(line: &str, line_no: usize, require_text: bool) -> Result<QuadBox> {
    // Split on the first 8 commas only, so transcriptions keep their commas.
    let fields: Vec<&str> = line.splitn(9, ',').collect();
    let min_fields = if require_text { 9 } else { 8 };
    if fields.len() < min_fields {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected {min_fields} comma-separated fields, got {}", fields.len()),
        });
    }
    let mut coords = [0.0f64; 8];
    for (i, c) in coords.iter_mut().enumerate() {
        *c = fields[i].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-numeric coordinate {:?}", fields[i]),
        })?;
    }
    let verts = [
        Vec2::new(coords[0], coords[1]),
        Vec2::new(coords[2], coords[3]),
        Vec2::new(coords[4], coords[5]),
        Vec2::new(coords[6], coords[7]),
    ];
    let mut quad = QuadBox::new(verts);
    if let Some(text) = fields.get(8) {
        if *text == "###" {
            quad.dont_care = true;
        }
        quad.transcription = Some(text.to_string());
    }
    Ok(quad)
}

fn parse_boxes(text: &str, require_text: bool) -> Result<Vec<QuadBox>> {
    let mut boxes = Vec::new();
    for (i, raw) in strip_bom(text).lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        boxes.push(parse_box_line(line, i + 1, require_text)?);
    }
    Ok(boxes)
}

/// Ground-truth lines: `x1,y1,x2,y2,x3,y3,x4,y4,transcription`, transcription
/// `###` marking a don't-care region. A UTF-8 BOM is tolerated.
pub fn parse_gt_text(text: &str) -> Result<Vec<QuadBox>> {
    parse_boxes(text, true)
}

/// Result lines: the 8 coordinates, optionally followed by a transcription.
pub fn parse_result_text(text: &str) -> Result<Vec<QuadBox>> {
    parse_boxes(text, false)
}

/// Serializes boxes back to the line format; `with_text` appends the
/// transcription field (empty when a box has none).
pub fn format_boxes(boxes: &[QuadBox], with_text: bool) -> String {
    let mut out = String::new();
    for b in boxes {
        let v = &b.verts;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y
        ));
        if with_text {
            out.push(',');
            if b.dont_care {
                out.push_str("###");
            } else {
                out.push_str(b.transcription.as_deref().unwrap_or(""));
            }
        }
        out.push('\n');
    }
    out
}

fn id_from_filename(name: &str, prefix: &str) -> Option<String> {
    name.strip_prefix(prefix)?
        .strip_suffix(".txt")
        .map(|s| s.to_string())
}

/// Reads `gt_«id».txt`.
pub fn read_gt_file(path: &Path) -> Result<ImageAnnotation> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let image_id = id_from_filename(name, "gt_")
        .ok_or_else(|| Error::InvalidInput(format!("not a gt_«id».txt file: {name:?}")))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(ImageAnnotation {
        image_id,
        boxes: parse_gt_text(&text)?,
    })
}

/// Reads `res_«id».txt` (transcriptions optional).
pub fn read_result_file(path: &Path) -> Result<ImageAnnotation> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let image_id = id_from_filename(name, "res_")
        .ok_or_else(|| Error::InvalidInput(format!("not a res_«id».txt file: {name:?}")))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(ImageAnnotation {
        image_id,
        boxes: parse_result_text(&text)?,
    })
}

/// All annotations in a directory with the given filename prefix, sorted by
/// image id.
pub fn read_annotation_dir(dir: &Path, prefix: &str) -> Result<Vec<ImageAnnotation>> {
    let mut out = Vec::new();
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(prefix) && name.ends_with(".txt") {
            let ann = if prefix == "gt_" {
                read_gt_file(&entry.path())?
            } else {
                read_result_file(&entry.path())?
            };
            out.push(ann);
        }
    }
    out.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(out)
}

/// Writes one `res_«id».txt` per annotation; `write_results(.., false)` emits
/// the 8-coordinate localization format, `true` the end-to-end format.
pub fn write_results(dir: &Path, anns: &[ImageAnnotation], with_text: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for ann in anns {
        let path = dir.join(format!("res_{}.txt", ann.image_id));
        std::fs::write(&path, format_boxes(&ann.boxes, with_text))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Text mask plus the auxiliary ignore mask from don't-care regions.
#[derive(Debug, Clone)]
pub struct RasterMasks {
    pub text: BinaryMask,
    pub ignore: BinaryMask,
}

/// A pixel `(r, c)` is text iff the point `(c, r)` lies inside (boundary
/// included) some non-don't-care quad; don't-care quads fill the ignore mask
/// instead.
pub fn rasterize_mask(ann: &ImageAnnotation, h: usize, w: usize) -> Result<RasterMasks> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidInput("mask dimensions must be positive".into()));
    }
    let mut text = BinaryMask::zeros(h, w);
    let mut ignore = BinaryMask::zeros(h, w);
    for quad in &ann.boxes {
        let (x0, y0, x1, y1) = quad.bounds();
        let r0 = y0.floor().max(0.0) as usize;
        let c0 = x0.floor().max(0.0) as usize;
        let r1 = (y1.ceil() as usize).min(h.saturating_sub(1));
        let c1 = (x1.ceil() as usize).min(w.saturating_sub(1));
        for r in r0..=r1.min(h - 1) {
            for c in c0..=c1.min(w - 1) {
                if quad.contains_point(Vec2::new(c as f64, r as f64)) {
                    if quad.dont_care {
                        ignore.set(r, c, 1);
                    } else {
                        text.set(r, c, 1);
                    }
                }
            }
        }
    }
    Ok(RasterMasks { text, ignore })
}

/// One word per line, UTF-8, blank lines ignored, BOM tolerated.
pub fn read_lexicon_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(strip_bom(&text)
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.to_string())
        .collect())
}

/// Loads the lexicon for an evaluation setting from the standard layout:
/// strong reads the per-image file (an image id is required), weak and
/// generic read their single test-set files.
pub fn load_setting_lexicon(
    vocab_dir: &Path,
    setting: Setting,
    image_id: Option<&str>,
) -> Result<Lexicon> {
    let path = match setting {
        Setting::Strong => {
            let id = image_id.ok_or_else(|| {
                Error::InvalidInput("the strong setting needs a per-image lexicon id".into())
            })?;
            vocab_dir.join("strong").join(format!("{id}.txt"))
        }
        Setting::Weak => vocab_dir.join("weak.txt"),
        Setting::Generic => vocab_dir.join("generic.txt"),
    };
    Ok(Lexicon::build(read_lexicon_file(&path)?, true))
}

/// Writes the vocabulary layout for a synthetic dataset: per-image strong
/// files (the image's own words plus distractors), the weak test-set file,
/// and the generic file.
pub fn write_synth_vocab(
    vocab_dir: &Path,
    anns: &[ImageAnnotation],
    generic_words: &[String],
) -> Result<()> {
    let strong_dir = vocab_dir.join("strong");
    std::fs::create_dir_all(&strong_dir)
        .map_err(|e| Error::io(strong_dir.display().to_string(), e))?;
    let mut weak: Vec<String> = Vec::new();
    for ann in anns {
        let mut words: Vec<String> = ann
            .boxes
            .iter()
            .filter(|b| !b.dont_care)
            .filter_map(|b| b.transcription.clone())
            .collect();
        for w in &words {
            if !weak.contains(w) {
                weak.push(w.clone());
            }
        }
        for distractor in generic_words {
            if !words.contains(distractor) {
                words.push(distractor.clone());
            }
        }
        let path = strong_dir.join(format!("{}.txt", ann.image_id));
        std::fs::write(&path, words.join("\n"))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    let weak_path = vocab_dir.join("weak.txt");
    std::fs::write(&weak_path, weak.join("\n"))
        .map_err(|e| Error::io(weak_path.display().to_string(), e))?;
    let generic_path = vocab_dir.join("generic.txt");
    std::fs::write(&generic_path, generic_words.join("\n"))
        .map_err(|e| Error::io(generic_path.display().to_string(), e))?;
    Ok(())
}
