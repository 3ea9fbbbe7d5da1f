//! 8-bit PGM/PPM image IO. RGB inputs are converted to luma with the
//! 0.299/0.587/0.114 weights; all loads yield a `[1, h, w]` tensor scaled to
//! `[0, 1]`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Parses P2/P5 (grayscale) and P3/P6 (RGB) with maxval <= 255.
pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<Tensor<S>> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| parse_err("missing magic"))?;
    let (channels, binary) = match magic.as_slice() {
        b"P2" => (1usize, false),
        b"P5" => (1, true),
        b"P3" => (3, false),
        b"P6" => (3, true),
        _ => return Err(parse_err("unsupported PNM magic")),
    };
    let w = next_usize(bytes, &mut pos)?;
    let h = next_usize(bytes, &mut pos)?;
    let maxval = next_usize(bytes, &mut pos)?;
    if w == 0 || h == 0 || maxval == 0 || maxval > 255 {
        return Err(parse_err("unsupported PNM dimensions or maxval"));
    }
    let n = w * h * channels;
    let mut raw = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the data.
        pos += 1;
        if bytes.len() < pos + n {
            return Err(parse_err("truncated PNM data"));
        }
        raw.extend_from_slice(&bytes[pos..pos + n]);
    } else {
        for _ in 0..n {
            let v = next_usize(bytes, &mut pos)?;
            if v > maxval {
                return Err(parse_err("sample exceeds maxval"));
            }
            raw.push(v as u8);
        }
    }

    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(w * h);
    if channels == 1 {
        data.extend(raw.iter().map(|&v| S::from_f64_lossy(v as f64 * scale)));
    } else {
        for px in raw.chunks(3) {
            let luma =
                0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            data.push(S::from_f64_lossy(luma * scale));
        }
    }
    Tensor::new(vec![1, h, w], data)
}

/// Writes a `[1, h, w]` tensor (values clamped to `[0,1]`) as binary PGM.
pub fn encode_pgm<S: Scalar>(image: &Tensor<S>) -> Result<Vec<u8>> {
    if image.rank() != 3 || image.shape()[0] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "PGM writer expects [1, h, w], got {:?}",
            image.shape()
        )));
    }
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let mut out = Vec::with_capacity(32 + h * w);
    write!(&mut out, "P5\n{w} {h}\n255\n").expect("vec write");
    for v in image.data() {
        let v = v.to_f64_lossy().clamp(0.0, 1.0);
        out.push((v * 255.0).round() as u8);
    }
    Ok(out)
}

pub fn load<S: Scalar>(path: &Path) -> Result<Tensor<S>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode(&bytes)
}

pub fn save_pgm<S: Scalar>(path: &Path, image: &Tensor<S>) -> Result<()> {
    let bytes = encode_pgm(image)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_err(msg: &str) -> Error {
    Error::Parse {
        line: 0,
        msg: msg.to_string(),
    }
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

fn next_usize(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = next_token(bytes, pos).ok_or_else(|| parse_err("unexpected end of header"))?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err("bad integer in PNM"))
}
