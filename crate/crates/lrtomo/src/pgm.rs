//! Greyscale PGM (`P2` ASCII and `P5` binary) images.
//!
//! Samples are normalized to `[0, 1]` by the header's maxval on read. On
//! write, values are mapped from a `[lo, hi]` window onto `0..=maxval` and
//! rounded; 16-bit binary samples are big-endian.

use std::fs;
use std::path::Path;

use lrtomo_core::Image;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a PGM file (expected P2 or P5 magic)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(&'static str),
    #[error("PGM image must be square, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("PGM pixel data truncated")]
    Truncated,
    #[error("PGM sample {0} exceeds maxval")]
    SampleRange(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmFormat {
    pub maxval: u16,
    pub binary: bool,
}

impl PgmFormat {
    pub const BINARY_8: PgmFormat = PgmFormat { maxval: 255, binary: true };
    pub const BINARY_16: PgmFormat = PgmFormat { maxval: 65535, binary: true };
    pub const ASCII_8: PgmFormat = PgmFormat { maxval: 255, binary: false };
}

pub fn load_image_pgm(path: impl AsRef<Path>) -> Result<Image, PgmError> {
    parse_pgm(&fs::read(path)?)
}

pub fn save_image_pgm(image: &Image, path: impl AsRef<Path>) -> Result<(), PgmError> {
    save_image_pgm_window(image, path, PgmFormat::BINARY_8, 0.0, 1.0)
}

/// Writes `image` with `[lo, hi]` mapped onto the full sample range; values
/// outside the window are clamped.
pub fn save_image_pgm_window(
    image: &Image,
    path: impl AsRef<Path>,
    format: PgmFormat,
    lo: f64,
    hi: f64,
) -> Result<(), PgmError> {
    fs::write(path, encode_pgm(image, format, lo, hi))?;
    Ok(())
}

pub fn encode_pgm(image: &Image, format: PgmFormat, lo: f64, hi: f64) -> Vec<u8> {
    let k = image.size();
    let maxval = format.maxval.max(1);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let quantize = |v: f64| -> u16 {
        let t = ((v - lo) / span).clamp(0.0, 1.0);
        (t * maxval as f64).round() as u16
    };
    let magic = if format.binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{k} {k}\n{maxval}\n").into_bytes();
    if format.binary {
        for &v in image.as_row_major() {
            let q = quantize(v);
            if maxval < 256 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&q.to_be_bytes());
            }
        }
    } else {
        for row in image.as_row_major().chunks(k.max(1)) {
            let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(PgmError::BadMagic),
    };
    let mut pos = 2;
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if width != height {
        return Err(PgmError::NotSquare { width, height });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::Header("maxval must be in 1..=65535"));
    }
    let n = width * height;
    let mut samples = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(PgmError::Header("missing separator before raster"));
        }
        pos += 1;
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        let raster = bytes.get(pos..pos + need).ok_or(PgmError::Truncated)?;
        if wide {
            samples.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32));
        } else {
            samples.extend(raster.iter().map(|&b| b as u32));
        }
    } else {
        for _ in 0..n {
            let v = header_number(bytes, &mut pos).map_err(|_| PgmError::Truncated)?;
            samples.push(v as u32);
        }
    }
    if let Some(&bad) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(PgmError::SampleRange(bad));
    }
    let scale = 1.0 / maxval as f64;
    let values = samples.into_iter().map(|v| v as f64 * scale).collect();
    Image::from_row_major(width, values).map_err(|_| PgmError::Header("bad dimensions"))
}

/// Next decimal token, skipping whitespace and `#` comments.
fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize, PgmError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(PgmError::Header("unexpected end of header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(PgmError::Header("expected a decimal number"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PgmError::Header("number out of range"))
}
