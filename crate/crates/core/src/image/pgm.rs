//! Binary PGM (`P5`, maxval 255) reader and writer.

use std::fs;
use std::path::Path;

use super::{quantize, Image, ImageError};

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImageError::Io { path: path.to_owned(), source })?;
    read_pgm(&bytes)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    fs::write(path, write_pgm(img)).map_err(|source| ImageError::Io { path: path.to_owned(), source })
}

/// Encodes as `P5\n<w> <h>\n255\n` followed by one byte per pixel.
pub fn write_pgm(img: &Image) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    /// Skips whitespace and `#` comments, then reads one token.
    fn token(&mut self) -> Result<&[u8], ImageError> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(ImageError::BadHeader("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| ImageError::BadHeader(format!("invalid {what}: {:?}", String::from_utf8_lossy(tok))))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<Image, ImageError> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P5" {
        return Err(ImageError::BadHeader(format!("expected magic P5, found {:?}", String::from_utf8_lossy(magic))));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::BadHeader("missing separator after maxval".into())),
    }
    let expected = width * height;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated { expected, found: payload.len() });
    }
    let data = payload[..expected].iter().map(|&b| f64::from(b)).collect();
    Image::new(width, height, data)
}
