//! Binary PPM (P6) and PGM (P5) files, 8- or 16-bit.
//!
//! 16-bit samples are big-endian per the format. Pixel values normalize to
//! `[0, 1]` on read and quantize back on write.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub struct PnmImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Channel-major values in [0, 1]: `data[c * h * w + y * w + x]`.
    pub data: Vec<f64>,
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedFile {
        what: "pnm",
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Reads header tokens, skipping whitespace and `#` comments.
struct TokenReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> TokenReader<'a> {
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Option<usize> {
        std::str::from_utf8(self.token()?).ok()?.parse().ok()
    }
}

pub fn read(path: impl AsRef<Path>) -> Result<PnmImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = TokenReader {
        bytes: &bytes,
        pos: 0,
    };
    let channels = match r.token() {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        other => {
            return Err(malformed(
                path,
                format!("unsupported magic {:?}", other.map(String::from_utf8_lossy)),
            ))
        }
    };
    let width = r.number().ok_or_else(|| malformed(path, "missing width"))?;
    let height = r.number().ok_or_else(|| malformed(path, "missing height"))?;
    let maxval = r.number().ok_or_else(|| malformed(path, "missing maxval"))?;
    if width == 0 || height == 0 {
        return Err(Error::DegenerateImage);
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(path, format!("bad maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = r.pos + 1;
    let wide = maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let n = width * height * channels;
    if bytes.len() < start + n * sample_bytes {
        return Err(malformed(path, "truncated pixel data"));
    }
    let raster = &bytes[start..start + n * sample_bytes];
    let mut data = vec![0.0; n];
    for i in 0..width * height {
        for c in 0..channels {
            let k = i * channels + c;
            let raw = if wide {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
            } else {
                raster[k] as f64
            };
            data[c * width * height + i] = raw / maxval as f64;
        }
    }
    Ok(PnmImage {
        channels,
        height,
        width,
        data,
    })
}

/// Writes 8-bit P5/P6 depending on `image.channels`.
pub fn write(path: impl AsRef<Path>, image: &PnmImage) -> Result<()> {
    write_with_maxval(path, image, 255)
}

pub fn write_with_maxval(path: impl AsRef<Path>, image: &PnmImage, maxval: u32) -> Result<()> {
    let path = path.as_ref();
    let magic = match image.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(malformed(path, format!("cannot write {c} channels"))),
    };
    let mut out = format!("{}\n{} {}\n{}\n", magic, image.width, image.height, maxval).into_bytes();
    let plane = image.width * image.height;
    for i in 0..plane {
        for c in 0..image.channels {
            let v = (image.data[c * plane + i] * maxval as f64).round() as i64;
            let v = v.clamp(0, maxval as i64) as u32;
            if maxval > 255 {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
