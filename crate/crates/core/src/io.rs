//! File formats.
//!
//! * KSP1: `"KSP1"`, u32 LE width, u32 LE height, then `(re, im)` f64 LE pairs row-major.
//! * IMGF: `"IMGF"`, u32 LE width, u32 LE height, then f64 LE values row-major.
//! * PGM (P5): 8- or 16-bit on read, rescaled to 0-255; written as 16-bit.
//! * PNG: grayscale or colour, 8- or 16-bit on read (converted to luma), rescaled to 0-255.
//! * Mask PGM: 8-bit, 255 for sampled bins and 0 otherwise.

use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Image, KSpace, Mask};

fn header(magic: &[u8; 4], width: usize, height: usize, payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8; 4], elem: usize) -> Result<(usize, usize, &'a [u8])> {
    let name = String::from_utf8_lossy(magic);
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(Error::Format(format!("missing {name} header")));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != w * h * elem {
        return Err(Error::Format(format!(
            "{name} body has {} bytes, expected {} for {w}x{h}",
            body.len(),
            w * h * elem
        )));
    }
    Ok((w, h, body))
}

fn f64_le(chunk: &[u8]) -> f64 {
    f64::from_le_bytes(chunk.try_into().unwrap())
}

pub fn encode_kspace(y: &KSpace) -> Vec<u8> {
    let mut out = header(b"KSP1", y.width(), y.height(), 16 * y.as_slice().len());
    for z in y.as_slice() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_kspace(bytes: &[u8]) -> Result<KSpace> {
    let (w, h, body) = parse_header(bytes, b"KSP1", 16)?;
    let data = body
        .chunks_exact(16)
        .map(|c| Complex64::new(f64_le(&c[..8]), f64_le(&c[8..])))
        .collect();
    KSpace::new(w, h, data)
}

pub fn encode_imgf(u: &Image) -> Vec<u8> {
    let mut out = header(b"IMGF", u.width(), u.height(), 8 * u.len());
    for v in u.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_imgf(bytes: &[u8]) -> Result<Image> {
    let (w, h, body) = parse_header(bytes, b"IMGF", 8)?;
    Image::new(w, h, body.chunks_exact(8).map(f64_le).collect())
}

/// Parses a binary PGM into `(width, height, maxval, samples)`.
fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, Vec<u32>)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    // exactly one whitespace byte before the raster
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let (w, h) = (w as usize, h as usize);
    let depth = if maxval < 256 { 1 } else { 2 };
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() < w * h * depth {
        return Err(Error::Format(format!("PGM raster truncated for {w}x{h}")));
    }
    let samples = if depth == 1 {
        body[..w * h].iter().map(|&b| b as u32).collect()
    } else {
        body[..2 * w * h]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    };
    Ok((w, h, maxval, samples))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let (w, h, maxval, samples) = parse_pgm(bytes)?;
    let scale = 255.0 / maxval as f64;
    Image::new(w, h, samples.into_iter().map(|s| s as f64 * scale).collect())
}

/// 16-bit PGM; values are clamped to 0-255 and mapped onto 0-65535.
pub fn encode_pgm16(u: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", u.width(), u.height()).into_bytes();
    for &v in u.as_slice() {
        let s = (v.clamp(0.0, 255.0) / 255.0 * 65535.0).round() as u16;
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn encode_mask_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.as_slice().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Any sample at or above half of maxval counts as sampled.
pub fn decode_mask_pgm(bytes: &[u8]) -> Result<Mask> {
    let (w, h, maxval, samples) = parse_pgm(bytes)?;
    Mask::new(w, h, samples.into_iter().map(|s| 2 * s >= maxval).collect())
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG decode failed: {e}")))?;
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    let data = luma.into_raw().into_iter().map(|s| s as f64 * 255.0 / 65535.0).collect();
    Image::new(w as usize, h as usize, data)
}

/// Reads PGM, PNG or IMGF, chosen by the file's magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    match bytes.get(..4) {
        Some(b"IMGF") => decode_imgf(bytes),
        Some([0x89, b'P', b'N', b'G']) => decode_png(bytes),
        _ if bytes.starts_with(b"P5") => decode_pgm(bytes),
        _ => Err(Error::Format("unrecognised image format".into())),
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    decode_image(&fs::read(path)?)
}

pub fn read_kspace(path: &Path) -> Result<KSpace> {
    decode_kspace(&fs::read(path)?)
}

pub fn write_kspace(path: &Path, y: &KSpace) -> Result<()> {
    Ok(fs::write(path, encode_kspace(y))?)
}

pub fn read_imgf(path: &Path) -> Result<Image> {
    decode_imgf(&fs::read(path)?)
}

pub fn write_imgf(path: &Path, u: &Image) -> Result<()> {
    Ok(fs::write(path, encode_imgf(u))?)
}

pub fn write_pgm16(path: &Path, u: &Image) -> Result<()> {
    Ok(fs::write(path, encode_pgm16(u))?)
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask_pgm(&fs::read(path)?)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    Ok(fs::write(path, encode_mask_pgm(mask))?)
}
