//! Binary (P5) greymap images, maxval 255.

use crate::types::ErrorReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn fill_rect(&mut self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, v: u8) {
        for r in rows.start..rows.end.min(self.height) {
            for c in cols.start..cols.end.min(self.width) {
                self.set(r, c, v);
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ErrorReport> {
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(ErrorReport::bad_format("not a binary PGM (P5) image"));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            // whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(ErrorReport::bad_format("truncated PGM header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(ErrorReport::bad_format("malformed PGM header"));
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ErrorReport::bad_format("malformed PGM header"))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(ErrorReport::bad_format(format!(
                "PGM maxval {maxval} is not supported, expected 255"
            )));
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(ErrorReport::bad_format("truncated PGM header"));
        }
        pos += 1;
        let need = width
            .checked_mul(height)
            .ok_or_else(|| ErrorReport::bad_format("PGM dimensions overflow"))?;
        if bytes.len() < pos + need {
            return Err(ErrorReport::bad_format("truncated PGM pixel data"));
        }
        Ok(GrayImage {
            width,
            height,
            pixels: bytes[pos..pos + need].to_vec(),
        })
    }
}
