//! Embedded 5x7 bitmap font covering the 36-character alphabet (a-z, 0-9).
//! Row bytes use the low 5 bits, bit 4 being the leftmost column.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Looks up the glyph for a character; uppercase letters fold to lowercase.
pub fn glyph(c: char) -> Option<&'static [u8; GLYPH_H]> {
    let c = c.to_ascii_lowercase();
    let idx = match c {
        'a'..='z' => c as usize - 'a' as usize,
        '0'..='9' => 26 + (c as usize - '0' as usize),
        _ => return None,
    };
    Some(&GLYPHS[idx])
}

#[rustfmt::skip]
const GLYPHS: [[u8; GLYPH_H]; 36] = [
    // a
    [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
    // b
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
    // c
    [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
    // d
    [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110],
    // e
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
    // f
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
    // g
    [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
    // h
    [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
    // i
    [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
    // j
    [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
    // k
    [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
    // l
    [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
    // m
    [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
    // n
    [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001],
    // o
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
    // p
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
    // q
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
    // r
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
    // s
    [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
    // t
    [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
    // u
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
    // v
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
    // w
    [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
    // x
    [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
    // y
    [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
    // z
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
    // 0
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
    // 1
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
    // 2
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
    // 3
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
    // 4
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
    // 5
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
    // 6
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
    // 7
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
    // 8
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
    // 9
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
];

/// Renders a word as a bit grid: glyphs side by side with a one-column gap,
/// scaled by an integer factor. Returns `(height, width, bits)`.
pub fn render_word(word: &str, scale: usize) -> Option<(usize, usize, Vec<u8>)> {
    assert!(scale >= 1);
    let glyphs: Option<Vec<&[u8; GLYPH_H]>> = word.chars().map(glyph).collect();
    let glyphs = glyphs?;
    if glyphs.is_empty() {
        return None;
    }
    let n = glyphs.len();
    let w = scale * ((GLYPH_W + 1) * n - 1);
    let h = scale * GLYPH_H;
    let mut bits = vec![0u8; h * w];
    for (gi, rows) in glyphs.iter().enumerate() {
        let x_off = gi * (GLYPH_W + 1) * scale;
        for (ry, row) in rows.iter().enumerate() {
            for rx in 0..GLYPH_W {
                if row & (1 << (GLYPH_W - 1 - rx)) != 0 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let y = ry * scale + dy;
                            let x = x_off + rx * scale + dx;
                            bits[y * w + x] = 1;
                        }
                    }
                }
            }
        }
    }
    Some((h, w, bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_exactly_the_36_character_alphabet() {
        for c in ('a'..='z').chain('0'..='9') {
            assert!(glyph(c).is_some(), "missing glyph {c}");
            assert!(glyph(c.to_ascii_uppercase()).is_some());
        }
        assert!(glyph('!').is_none());
        assert!(glyph(' ').is_none());
    }

    #[test]
    fn glyphs_are_distinct() {
        for a in ('a'..='z').chain('0'..='9') {
            for b in ('a'..='z').chain('0'..='9') {
                if a < b {
                    assert_ne!(glyph(a).unwrap(), glyph(b).unwrap(), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn render_dimensions_and_scaling() {
        let (h, w, bits) = render_word("hi", 1).unwrap();
        assert_eq!((h, w), (7, 11));
        assert_eq!(bits.len(), h * w);
        let (h2, w2, bits2) = render_word("hi", 2).unwrap();
        assert_eq!((h2, w2), (14, 22));
        // Scaling duplicates pixels.
        for y in 0..h {
            for x in 0..w {
                assert_eq!(bits[y * w + x], bits2[(2 * y) * w2 + 2 * x]);
            }
        }
        assert!(render_word("", 1).is_none());
        assert!(render_word("a!", 1).is_none());
    }
}
